use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Segment, Side, Vec2};

use super::TriMesh;

/// Mesh generator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    /// Grid for axis-aligned polygons whose vertices lie on the `h` lattice,
    /// radial rings otherwise.
    #[default]
    Auto,
    /// Structured grid, each square cell split along one diagonal.
    Grid,
    /// Concentric rings around the centroid; needs a domain star-shaped with
    /// respect to its centroid.
    Radial,
}

pub(super) fn generate(domain: &Domain, h: f64, kind: MeshKind) -> Result<TriMesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("mesh size {h} must be positive")));
    }
    match kind {
        MeshKind::Grid => grid(domain, h),
        MeshKind::Radial => radial(domain, h),
        MeshKind::Auto => {
            if lattice_polygon(domain, h).is_some() {
                grid(domain, h)
            } else {
                radial(domain, h)
            }
        }
    }
}

/// Vertices of an axis-aligned polygon on the lattice `origin + h Z²`.
fn lattice_polygon(domain: &Domain, h: f64) -> Option<(Vec<Vec2>, Vec2)> {
    let mut verts = Vec::new();
    for seg in domain.curve.segments() {
        match seg {
            Segment::Line { a, b } => {
                if (a.x - b.x).abs() > 1e-12 && (a.y - b.y).abs() > 1e-12 {
                    return None;
                }
                verts.push(*a);
            }
            Segment::Cubic { .. } => return None,
        }
    }
    let origin = Vec2::new(
        verts.iter().map(|v| v.x).fold(f64::INFINITY, f64::min),
        verts.iter().map(|v| v.y).fold(f64::INFINITY, f64::min),
    );
    for v in &verts {
        for c in [(v.x - origin.x) / h, (v.y - origin.y) / h] {
            if (c - c.round()).abs() > 1e-9 {
                return None;
            }
        }
    }
    Some((verts, origin))
}

fn inside_polygon(p: &Vec2, verts: &[Vec2]) -> bool {
    let n = verts.len();
    let mut inside = false;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn grid(domain: &Domain, h: f64) -> Result<TriMesh> {
    let (verts, origin) = lattice_polygon(domain, h).ok_or_else(|| {
        Error::Geometry(format!(
            "grid meshing needs an axis-aligned polygon with vertices on the h = {h} lattice"
        ))
    })?;
    let xmax = verts.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
    let ymax = verts.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
    let nx = ((xmax - origin.x) / h).round() as usize;
    let ny = ((ymax - origin.y) / h).round() as usize;
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut node_of = |i: usize, j: usize, nodes: &mut Vec<Vec2>| -> usize {
        *index.entry((i, j)).or_insert_with(|| {
            nodes.push(Vec2::new(origin.x + i as f64 * h, origin.y + j as f64 * h));
            nodes.len() - 1
        })
    };
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = Vec2::new(origin.x + (i as f64 + 0.5) * h, origin.y + (j as f64 + 0.5) * h);
            if !inside_polygon(&c, &verts) {
                continue;
            }
            let p00 = node_of(i, j, &mut nodes);
            let p10 = node_of(i + 1, j, &mut nodes);
            let p11 = node_of(i + 1, j + 1, &mut nodes);
            let p01 = node_of(i, j + 1, &mut nodes);
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
    }
    let start = nodes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 - verts[0]).norm();
            let db = (b.1 - verts[0]).norm();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Geometry("grid mesh is empty".into()))?;
    let boundary = boundary_loop(&triangles, start)?;
    let length = domain.length();
    let mut params = Vec::with_capacity(boundary.len());
    for (k, &n) in boundary.iter().enumerate() {
        let (s, dist) = domain.curve.project(&nodes[n]);
        if dist > 1e-9 {
            return Err(Error::Geometry("grid boundary does not follow the curve".into()));
        }
        let s = if k == 0 {
            0.0
        } else if s < 1e-12 * length {
            length
        } else {
            s
        };
        params.push(s);
    }
    finish(domain, nodes, triangles, boundary, params, h)
}

/// Walks the directed boundary edges of a CCW triangulation.
fn boundary_loop(triangles: &[[usize; 3]], start: usize) -> Result<Vec<usize>> {
    let mut directed = HashSet::new();
    for t in triangles {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    let mut next = HashMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) && next.insert(a, b).is_some() {
            return Err(Error::Geometry(format!("boundary pinches at node {a}")));
        }
    }
    let mut out = vec![start];
    let mut cur = start;
    loop {
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::Geometry("start node is not on the boundary".into()))?;
        if cur == start {
            break;
        }
        out.push(cur);
        if out.len() > next.len() {
            return Err(Error::Geometry("boundary loop does not close".into()));
        }
    }
    if out.len() != next.len() {
        return Err(Error::Geometry("boundary has more than one component".into()));
    }
    Ok(out)
}

/// Curve parameters for boundary nodes: every corner and arc junction is a
/// node, and each piece between them is split evenly with spacing at most `h`.
fn boundary_params(domain: &Domain, h: f64) -> Vec<f64> {
    let length = domain.length();
    let mut breaks = vec![0.0];
    breaks.extend(domain.curve.corner_params());
    breaks.push(domain.curve.wrap(domain.gamma_i.start));
    breaks.push(domain.curve.wrap(domain.gamma_i.end()));
    breaks.iter_mut().for_each(|b| {
        if *b >= length * (1.0 - 1e-12) {
            *b = 0.0;
        }
    });
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * length);
    let mut params = Vec::new();
    for k in 0..breaks.len() {
        let a = breaks[k];
        let b = if k + 1 < breaks.len() { breaks[k + 1] } else { length };
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        for j in 0..n {
            params.push(a + (b - a) * j as f64 / n as f64);
        }
    }
    params
}

fn radial(domain: &Domain, h: f64) -> Result<TriMesh> {
    let length = domain.length();
    let center = domain.centroid();
    let params = boundary_params(domain, h);
    let outer: Vec<Vec2> = params.iter().map(|&s| domain.curve.point_at(s)).collect();
    let radius = outer.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let m = (radius / h).ceil().max(1.0) as usize;
    let nb = outer.len();

    let mut nodes = vec![center];
    // ring node indices and their angular fractions in [0, 1)
    let mut rings: Vec<(Vec<usize>, Vec<f64>)> = vec![(vec![0], vec![0.0])];
    for k in 1..m {
        let t = k as f64 / m as f64;
        let count = ((nb as f64 * t).round() as usize).max(6 * k).min(nb).max(3);
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        let mut ids = Vec::with_capacity(count);
        let mut fr = Vec::with_capacity(count);
        for j in 0..count {
            let f = (j as f64 + shift) / count as f64;
            let b = domain.curve.point_at(f * length);
            nodes.push(center + (b - center) * t);
            ids.push(nodes.len() - 1);
            fr.push(f);
        }
        rings.push((ids, fr));
    }
    let first_outer = nodes.len();
    nodes.extend(outer.iter().copied());
    rings.push((
        (first_outer..first_outer + nb).collect(),
        params.iter().map(|s| s / length).collect(),
    ));

    let mut triangles = Vec::new();
    for k in 1..rings.len() {
        let (inner_ids, inner_f) = &rings[k - 1];
        let (outer_ids, outer_f) = &rings[k];
        if k == 1 {
            for j in 0..outer_ids.len() {
                triangles.push([0, outer_ids[j], outer_ids[(j + 1) % outer_ids.len()]]);
            }
            continue;
        }
        zip_rings(inner_ids, inner_f, outer_ids, outer_f, &mut triangles);
    }
    let boundary: Vec<usize> = (first_outer..first_outer + nb).collect();
    finish(domain, nodes, triangles, boundary, params, h)
        .map_err(|e| match e {
            Error::Geometry(msg) => Error::Geometry(format!(
                "radial mesh failed ({msg}); the domain must be star-shaped about its centroid"
            )),
            other => other,
        })
}

/// Triangulates the annulus between two closed rings given by increasing
/// fractions of a turn.
fn zip_rings(
    inner: &[usize],
    inner_f: &[f64],
    outer: &[usize],
    outer_f: &[f64],
    tris: &mut Vec<[usize; 3]>,
) {
    let p = inner.len();
    let q = outer.len();
    let cyc = |d: f64| d - d.round();
    // outer index nearest to the first inner node
    let j0 = (0..q)
        .min_by(|&a, &b| {
            cyc(outer_f[a] - inner_f[0])
                .abs()
                .partial_cmp(&cyc(outer_f[b] - inner_f[0]).abs())
                .unwrap()
        })
        .unwrap();
    let a_f = |i: usize| inner_f[i % p] + (i / p) as f64;
    let base = inner_f[0] + cyc(outer_f[j0] - inner_f[0]);
    let b_f = |j: usize| {
        let idx = (j0 + j) % q;
        base + (outer_f[idx] - outer_f[j0]).rem_euclid(1.0) + (j / q) as f64
    };
    let b_id = |j: usize| outer[(j0 + j) % q];
    let (mut i, mut j) = (0usize, 0usize);
    while i < p || j < q {
        let advance_inner = i < p && (j == q || a_f(i + 1) <= b_f(j + 1));
        if advance_inner {
            tris.push([inner[i % p], b_id(j), inner[(i + 1) % p]]);
            i += 1;
        } else {
            tris.push([inner[i % p], b_id(j), b_id(j + 1)]);
            j += 1;
        }
    }
}

fn finish(
    domain: &Domain,
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    params: Vec<f64>,
    h: f64,
) -> Result<TriMesh> {
    let length = domain.length();
    let n = boundary.len();
    let mut sides = Vec::with_capacity(n);
    for k in 0..n {
        let a = params[k];
        let b = if k + 1 < n { params[k + 1] } else { length };
        if b <= a {
            return Err(Error::Geometry("boundary parameters are not increasing".into()));
        }
        let side = domain
            .side_of(0.5 * (a + b))
            .ok_or_else(|| Error::Geometry("edge midpoint on an arc junction".into()))?;
        sides.push(side);
    }
    // junctions must be mesh nodes so that every edge lies on a single arc
    for s in [domain.gamma_i.start, domain.gamma_i.end()] {
        let s = domain.curve.wrap(s);
        let hit = params
            .iter()
            .any(|&p| (p - s).abs() < 1e-9 * length || (p + length - s).abs() < 1e-9 * length);
        if !hit {
            return Err(Error::Geometry(format!(
                "arc junction at s = {s:.6} is not a mesh node; choose h compatible with the arcs"
            )));
        }
    }
    if !sides.iter().any(|s| *s == Side::I) && domain.gamma_i.span > 0.0 {
        return Err(Error::Geometry("no boundary edge lies on the inaccessible arc".into()));
    }
    let params = params.iter().map(|&p| domain.curve.wrap(p)).collect();
    TriMesh::assemble(nodes, triangles, boundary, params, sides, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::{disk, l_shape};

    #[test]
    fn disk_radial_mesh_is_valid() {
        let d = disk();
        let m = TriMesh::generate(&d, 0.05, MeshKind::Auto).unwrap();
        let area: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        assert!((area - std::f64::consts::PI).abs() < 5e-3, "{area}");
        assert!(m.min_quality() > 0.3, "{}", m.min_quality());
        // Euler characteristic of a disk: V - E + F = 1
        let e = (3 * m.triangles.len() + m.n_boundary()) / 2;
        assert_eq!(m.n_nodes() + m.triangles.len() - e, 1);
        let i_len: f64 = m.side_edges(Side::I).map(|k| m.edge_length(k)).sum();
        assert!((i_len - std::f64::consts::PI).abs() < 1e-2);
        // outward normals
        for k in 0..m.n_boundary() {
            let (a, b) = m.edge(k);
            let mid = 0.5 * (m.nodes[a] + m.nodes[b]);
            assert!(m.edge_normal(k).dot(&mid) > 0.99 * mid.norm());
        }
    }

    #[test]
    fn l_shape_grid_mesh() {
        let d = l_shape();
        let m = TriMesh::generate(&d, 0.125, MeshKind::Auto).unwrap();
        let area: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        assert!((area - 3.0).abs() < 1e-12);
        assert_eq!(m.n_boundary(), 64);
        assert_eq!(m.side_chain(Side::I).len(), 17);
        let chain = m.side_chain(Side::I);
        assert!((m.nodes[m.boundary[chain[0]]] - Vec2::new(0.0, -1.0)).norm() < 1e-12);
        assert!((m.nodes[m.boundary[chain[8]]]).norm() < 1e-12);
    }

    #[test]
    fn grid_rejects_off_lattice() {
        let d = l_shape();
        assert!(TriMesh::generate(&d, 0.3, MeshKind::Grid).is_err());
    }
}
