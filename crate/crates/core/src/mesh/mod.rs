//! Conforming triangulations with a marked, ordered boundary loop.

mod generate;
mod io;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Side, Vec2};

pub use generate::MeshKind;

/// A conforming P1 triangulation whose boundary nodes form one closed
/// counter-clockwise loop.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary loop; edge `k` joins `boundary[k]` and `boundary[k + 1]`.
    pub boundary: Vec<usize>,
    /// Curve arclength parameter of each loop node.
    pub boundary_param: Vec<f64>,
    /// Arc label of each loop edge.
    pub edge_side: Vec<Side>,
    /// Nominal mesh size used at generation.
    pub h: f64,
    loop_index: HashMap<usize, usize>,
}

/// Elements of the mesh whose centroids lie in `B_r(x0) ∩ Ω̅`.
#[derive(Debug, Clone)]
pub struct SolidBallMask {
    pub elements: Vec<usize>,
    /// Set when `r` is below the smallest element diameter or nothing was
    /// selected.
    pub under_resolved: bool,
}

impl TriMesh {
    pub(crate) fn assemble(
        nodes: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<usize>,
        boundary_param: Vec<f64>,
        edge_side: Vec<Side>,
        h: f64,
    ) -> Result<Self> {
        if boundary.len() != boundary_param.len() || boundary.len() != edge_side.len() {
            return Err(Error::InvalidInput("boundary arrays differ in length".into()));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidInput(format!("triangle {k} references a missing node")));
            }
        }
        let loop_index = boundary.iter().enumerate().map(|(k, &n)| (n, k)).collect();
        let mesh = TriMesh {
            nodes,
            triangles,
            boundary,
            boundary_param,
            edge_side,
            h,
            loop_index,
        };
        for k in 0..mesh.triangles.len() {
            if mesh.area(k) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {k} is inverted or degenerate")));
            }
        }
        Ok(mesh)
    }

    /// Generates a mesh for `domain` with nominal size `h`.
    pub fn generate(domain: &Domain, h: f64, kind: MeshKind) -> Result<Self> {
        generate::generate(domain, h, kind)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Nodes of boundary edge `k`.
    pub fn edge(&self, k: usize) -> (usize, usize) {
        let n = self.boundary.len();
        (self.boundary[k], self.boundary[(k + 1) % n])
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let (a, b) = self.edge(k);
        (self.nodes[b] - self.nodes[a]).norm()
    }

    /// Outward unit normal of boundary edge `k`.
    pub fn edge_normal(&self, k: usize) -> Vec2 {
        let (a, b) = self.edge(k);
        let d = (self.nodes[b] - self.nodes[a]).normalize();
        Vec2::new(d.y, -d.x)
    }

    /// Loop position of a boundary node.
    pub fn loop_position(&self, node: usize) -> Option<usize> {
        self.loop_index.get(&node).copied()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.loop_index.contains_key(&node)
    }

    /// Cumulative polyline arclength at each loop position (starting at 0).
    pub fn loop_arclength(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.boundary.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 0..self.boundary.len() {
            acc += self.edge_length(k);
            out.push(acc);
        }
        out
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.boundary.len()).map(|k| self.edge_length(k)).sum()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * (q - p).perp(&(r - p))
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        (q - p).norm().max((r - q).norm()).max((p - r).norm())
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Smallest ratio of inradius to circumradius times two (1 for
    /// equilateral triangles); a shape-regularity indicator.
    pub fn min_quality(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangles[t];
                let la = (self.nodes[b] - self.nodes[c]).norm();
                let lb = (self.nodes[c] - self.nodes[a]).norm();
                let lc = (self.nodes[a] - self.nodes[b]).norm();
                let area = self.area(t);
                let s = 0.5 * (la + lb + lc);
                let inr = area / s;
                let circ = la * lb * lc / (4.0 * area);
                2.0 * inr / circ
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Total area of the listed elements.
    pub fn elements_area(&self, elements: &[usize]) -> f64 {
        elements.iter().map(|&t| self.area(t)).sum()
    }

    /// Elements with centroid in `B_r(x0)`.
    pub fn mask_solid_ball(&self, x0: &Vec2, r: f64) -> Result<SolidBallMask> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius {r} must be positive")));
        }
        let elements: Vec<usize> = (0..self.triangles.len())
            .filter(|&t| (self.centroid(t) - x0).norm() < r)
            .collect();
        let under_resolved = elements.is_empty() || r < self.min_diameter();
        Ok(SolidBallMask {
            elements,
            under_resolved,
        })
    }

    /// Node indices strictly inside the domain.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|n| !self.is_boundary(*n)).collect()
    }

    /// Loop positions whose node lies on the closed arc `side`: endpoints of
    /// any edge labelled `side`, in loop order starting after a junction.
    pub fn side_chain(&self, side: Side) -> Vec<usize> {
        let n = self.boundary.len();
        let labelled: Vec<bool> = self.edge_side.iter().map(|s| *s == side).collect();
        if labelled.iter().all(|&b| b) {
            return (0..n).collect();
        }
        // start at an edge whose predecessor has the other label
        let start = (0..n)
            .find(|&k| labelled[k] && !labelled[(k + n - 1) % n])
            .unwrap_or(0);
        let mut chain = Vec::new();
        let mut k = start;
        while labelled[k] {
            if chain.is_empty() {
                chain.push(k);
            }
            chain.push((k + 1) % n);
            k = (k + 1) % n;
            if k == start {
                break;
            }
        }
        chain
    }

    /// Loop edges labelled `side`.
    pub fn side_edges(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        (0..self.boundary.len()).filter(move |&k| self.edge_side[k] == side)
    }

    pub fn write(&self, w: &mut impl std::io::Write) -> Result<()> {
        io::write_mesh(self, w)
    }

    pub fn read(r: impl std::io::BufRead) -> Result<Self> {
        io::read_mesh(r)
    }
}
