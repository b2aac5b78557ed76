//! Plain-text mesh format.
//!
//! ```text
//! robin-lab-mesh 1
//! h <h>
//! nodes <N>
//! <x> <y>            (N lines)
//! triangles <T>
//! <a> <b> <c>        (T lines)
//! boundary <B>
//! <node> <s> <A|I>   (B lines; the label belongs to the edge leaving the node)
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{Side, Vec2};

use super::TriMesh;

const MAGIC: &str = "robin-lab-mesh 1";

pub(super) fn write_mesh(mesh: &TriMesh, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "h {:.17e}", mesh.h)?;
    writeln!(w, "nodes {}", mesh.nodes.len())?;
    for p in &mesh.nodes {
        writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary {}", mesh.boundary.len())?;
    for k in 0..mesh.boundary.len() {
        let label = match mesh.edge_side[k] {
            Side::A => "A",
            Side::I => "I",
        };
        writeln!(w, "{} {:.17e} {label}", mesh.boundary[k], mesh.boundary_param[k])?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::Parse(format!("unexpected end of mesh file at line {}", self.line))),
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("mesh line {}: {msg}", self.line))
    }

    fn header(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.err(&format!("expected '{key}'")));
        }
        it.next().map(str::to_string).ok_or_else(|| self.err("missing value"))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.header(key)?;
        v.parse().map_err(|_| self.err("bad count"))
    }

    fn fields<const N: usize>(&mut self) -> Result<[String; N]> {
        let l = self.next()?;
        let parts: Vec<String> = l.split_whitespace().map(str::to_string).collect();
        parts.try_into().map_err(|_| self.err(&format!("expected {N} fields")))
    }
}

fn num<T: std::str::FromStr>(s: &str, lines: &Lines<impl BufRead>) -> Result<T> {
    s.parse().map_err(|_| lines.err(&format!("cannot parse '{s}'")))
}

pub(super) fn read_mesh(r: impl BufRead) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err("not a robin-lab mesh"));
    }
    let h: f64 = {
        let v = lines.header("h")?;
        num(&v, &lines)?
    };
    let n = lines.count("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let [x, y] = lines.fields::<2>()?;
        nodes.push(Vec2::new(num(&x, &lines)?, num(&y, &lines)?));
    }
    let t = lines.count("triangles")?;
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let [a, b, c] = lines.fields::<3>()?;
        triangles.push([num(&a, &lines)?, num(&b, &lines)?, num(&c, &lines)?]);
    }
    let b = lines.count("boundary")?;
    let mut boundary = Vec::with_capacity(b);
    let mut params = Vec::with_capacity(b);
    let mut sides = Vec::with_capacity(b);
    for _ in 0..b {
        let [node, s, label] = lines.fields::<3>()?;
        boundary.push(num(&node, &lines)?);
        params.push(num(&s, &lines)?);
        sides.push(match label.as_str() {
            "A" => Side::A,
            "I" => Side::I,
            _ => return Err(lines.err("edge label must be A or I")),
        });
    }
    if boundary.iter().any(|&k| k >= n) {
        return Err(Error::Parse("boundary references a missing node".into()));
    }
    TriMesh::assemble(nodes, triangles, boundary, params, sides, h)
}

#[cfg(test)]
mod tests {
    use crate::mesh::tests::unit_square;
    use crate::mesh::{MeshKind, TriMesh};

    #[test]
    fn round_trip() {
        let d = unit_square();
        let m = TriMesh::generate(&d, 0.25, MeshKind::Auto).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = TriMesh::read(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary, m.boundary);
        assert_eq!(back.edge_side, m.edge_side);
        assert_eq!(back.boundary_param, m.boundary_param);
    }

    #[test]
    fn malformed_input_is_reported() {
        let bad = "robin-lab-mesh 1\nh 0.1\nnodes 2\n0 0\n";
        assert!(TriMesh::read(std::io::Cursor::new(bad)).is_err());
        assert!(TriMesh::read(std::io::Cursor::new("hello\n")).is_err());
    }
}
