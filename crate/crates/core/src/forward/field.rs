use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Side, Vec2};
use crate::mesh::TriMesh;
use crate::quadrature::GAUSS3;

use super::solve::{recover_normal_derivative, stiffness};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// A P1 field with its boundary trace and recovered normal derivative.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub mesh: Arc<TriMesh>,
    /// Nodal values (interior and boundary).
    pub values: Vec<f64>,
    /// `∂u/∂ν` per loop position.
    pub normal_derivative: Vec<f64>,
    /// Present for fields produced by a solve.
    pub solve: Option<SolveReport>,
}

/// Gradients of the three barycentric shape functions of element `e`.
pub(crate) fn shape_gradients(mesh: &TriMesh, e: usize) -> [Vec2; 3] {
    let [a, b, c] = mesh.triangles[e];
    let (p, q, r) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    let two_a = (q - p).perp(&(r - p));
    let rot = |d: Vec2| Vec2::new(-d.y, d.x) / two_a;
    [rot(r - q), rot(p - r), rot(q - p)]
}

impl DiscreteField {
    pub(crate) fn from_parts(
        mesh: Arc<TriMesh>,
        values: Vec<f64>,
        normal_derivative: Vec<f64>,
        solve: Option<SolveReport>,
    ) -> Self {
        DiscreteField {
            mesh,
            values,
            normal_derivative,
            solve,
        }
    }

    /// Injects nodal values; the normal derivative is recovered from the
    /// stiffness residual, which is meaningful for (nearly) harmonic data.
    pub fn from_nodal(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::InvalidInput("one value per node is required".into()));
        }
        let k = stiffness(&mesh);
        let nd = recover_normal_derivative(&mesh, &k, &values)?;
        Ok(Self::from_parts(mesh, values, nd, None))
    }

    /// Interpolates `f` at the nodes.
    pub fn interpolate(mesh: Arc<TriMesh>, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let values = mesh.nodes.iter().map(|p| f(*p)).collect();
        Self::from_nodal(mesh, values)
    }

    /// Replaces the recovered normal derivative with given values.
    pub fn with_normal_derivative(mut self, nd: Vec<f64>) -> Result<Self> {
        if nd.len() != self.mesh.n_boundary() {
            return Err(Error::InvalidInput("one value per boundary node is required".into()));
        }
        self.normal_derivative = nd;
        Ok(self)
    }

    /// Values at loop positions.
    pub fn trace(&self) -> Vec<f64> {
        self.mesh.boundary.iter().map(|&n| self.values[n]).collect()
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&n| self.values[n]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        DiscreteField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            normal_derivative: self.normal_derivative.iter().map(|v| v * s).collect(),
            solve: self.solve,
        }
    }

    pub fn gradient(&self, e: usize) -> Vec2 {
        let g = shape_gradients(&self.mesh, e);
        let t = self.mesh.triangles[e];
        g[0] * self.values[t[0]] + g[1] * self.values[t[1]] + g[2] * self.values[t[2]]
    }

    /// Value at an arbitrary point of the closed domain, `None` outside.
    pub fn value_at(&self, x: &Vec2) -> Option<f64> {
        for t in &self.mesh.triangles {
            let (p, q, r) = (self.mesh.nodes[t[0]], self.mesh.nodes[t[1]], self.mesh.nodes[t[2]]);
            let two_a = (q - p).perp(&(r - p));
            let lp = (q - x).perp(&(r - x)) / two_a;
            let lq = (r - x).perp(&(p - x)) / two_a;
            let lr = 1.0 - lp - lq;
            if lp >= -1e-12 && lq >= -1e-12 && lr >= -1e-12 {
                return Some(lp * self.values[t[0]] + lq * self.values[t[1]] + lr * self.values[t[2]]);
            }
        }
        None
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫_Ω |∇u|²`.
    pub fn dirichlet_energy(&self) -> f64 {
        (0..self.mesh.triangles.len())
            .map(|e| self.mesh.area(e) * self.gradient(e).norm_squared())
            .sum()
    }

    /// `∫_Ω u²`, exact for P1.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq_on((0..self.mesh.triangles.len()).collect::<Vec<_>>().as_slice())
    }

    /// `∫ u²` over the listed elements.
    pub fn l2_norm_sq_on(&self, elements: &[usize]) -> f64 {
        elements
            .iter()
            .map(|&e| {
                let t = self.mesh.triangles[e];
                let (a, b, c) = (self.values[t[0]], self.values[t[1]], self.values[t[2]]);
                self.mesh.area(e) / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a)
            })
            .sum()
    }

    /// `‖u‖²_{H¹(Ω)}`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.l2_norm_sq() + self.dirichlet_energy()
    }

    /// Arclength derivative of the trace on each loop edge.
    pub fn tangential_derivative(&self) -> Vec<f64> {
        let t = self.trace();
        let n = t.len();
        (0..n)
            .map(|k| (t[(k + 1) % n] - t[k]) / self.mesh.edge_length(k))
            .collect()
    }

    fn edge_filter(&self, side: Option<Side>) -> impl Iterator<Item = usize> + '_ {
        (0..self.mesh.n_boundary()).filter(move |&k| side.is_none_or(|s| self.mesh.edge_side[k] == s))
    }

    /// `∫ trace²` over the chosen part of the boundary (`None` = all of ∂Ω).
    pub fn trace_l2_sq(&self, side: Option<Side>) -> f64 {
        let t = self.trace();
        let n = t.len();
        self.edge_filter(side)
            .map(|k| {
                let (a, b) = (t[k], t[(k + 1) % n]);
                self.mesh.edge_length(k) / 3.0 * (a * a + a * b + b * b)
            })
            .sum()
    }

    /// `∫ |∇_T u|²` over the chosen part of the boundary.
    pub fn tangential_l2_sq(&self, side: Option<Side>) -> f64 {
        let d = self.tangential_derivative();
        self.edge_filter(side)
            .map(|k| d[k] * d[k] * self.mesh.edge_length(k))
            .sum()
    }

    /// `∫ (∂u/∂ν)²` over the chosen part of the boundary.
    pub fn normal_l2_sq(&self, side: Option<Side>) -> f64 {
        let d = &self.normal_derivative;
        let n = d.len();
        self.edge_filter(side)
            .map(|k| {
                let (a, b) = (d[k], d[(k + 1) % n]);
                self.mesh.edge_length(k) / 3.0 * (a * a + a * b + b * b)
            })
            .sum()
    }

    /// `∫_{∂Ω} ∂u/∂ν`.
    pub fn total_flux(&self) -> f64 {
        let d = &self.normal_derivative;
        let n = d.len();
        (0..n)
            .map(|k| 0.5 * (d[k] + d[(k + 1) % n]) * self.mesh.edge_length(k))
            .sum()
    }

    /// `(‖u‖²_{L²(∂Ω)} + ‖∇_T u‖²_{L²(∂Ω)})^{1/2}`.
    pub fn boundary_h1_norm(&self) -> f64 {
        (self.trace_l2_sq(None) + self.tangential_l2_sq(None)).sqrt()
    }

    /// Interior stiffness residual relative to the boundary one; near zero
    /// for discretely harmonic fields.
    pub fn harmonic_residual(&self) -> f64 {
        let k = stiffness(&self.mesh);
        let ku = k.apply(&self.values);
        let mut interior = 0.0;
        let mut boundary = 0.0;
        for (i, v) in ku.iter().enumerate() {
            if self.mesh.is_boundary(i) {
                boundary += v * v;
            } else {
                interior += v * v;
            }
        }
        if boundary == 0.0 {
            return if interior == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (interior / boundary).sqrt()
    }

    /// `∫ f(trace) ` along the boundary with 3-point Gauss per edge.
    pub fn boundary_integral(&self, side: Option<Side>, f: impl Fn(f64) -> f64) -> f64 {
        let t = self.trace();
        let n = t.len();
        self.edge_filter(side)
            .map(|k| {
                let (a, b) = (t[k], t[(k + 1) % n]);
                GAUSS3.integrate(0.0, self.mesh.edge_length(k), |x| {
                    f(a + (b - a) * x / self.mesh.edge_length(k))
                })
            })
            .sum()
    }

    /// Per-node CSV: `id,x,y,value`.
    pub fn write_nodes_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["id", "x", "y", "value"])?;
        for (i, p) in self.mesh.nodes.iter().enumerate() {
            wr.write_record([
                i.to_string(),
                fmt(p.x),
                fmt(p.y),
                fmt(self.values[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Boundary CSV: `s,side,trace,normal_derivative` per loop node; `side`
    /// labels the edge leaving the node.
    pub fn write_boundary_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "side", "trace", "normal_derivative"])?;
        let t = self.trace();
        for k in 0..self.mesh.n_boundary() {
            let side = match self.mesh.edge_side[k] {
                Side::A => "A",
                Side::I => "I",
            };
            wr.write_record([
                fmt(self.mesh.boundary_param[k]),
                side.to_string(),
                fmt(t[k]),
                fmt(self.normal_derivative[k]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

const JUNCTION_SKIP: usize = 3;

/// Result of [`quotient_field`].
#[derive(Debug, Clone)]
pub struct QuotientField {
    pub z: DiscreteField,
    /// Relative interior residual of the weighted operator `div(v²∇·)`
    /// applied to `z`.
    pub weighted_residual: f64,
    /// `max |v² ∂z/∂ν|` from `v ∂u/∂ν − u ∂v/∂ν` over Γ_I nodes, skipping
    /// the nodes next to the junctions where the recovered fluxes of both
    /// arcs mix.
    pub neumann_defect: f64,
}

/// Nodewise quotient `z = u/v` with weighted-equation diagnostics.
pub fn quotient_field(u: &DiscreteField, v: &DiscreteField, floor: f64) -> Result<QuotientField> {
    if !Arc::ptr_eq(&u.mesh, &v.mesh) && u.mesh.n_nodes() != v.mesh.n_nodes() {
        return Err(Error::InvalidInput("fields live on different meshes".into()));
    }
    let min_abs = v.values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if min_abs < floor || min_abs == 0.0 {
        return Err(Error::DivisionUnsafe { min_abs, floor });
    }
    let mesh = u.mesh.clone();
    let zv: Vec<f64> = u.values.iter().zip(&v.values).map(|(a, b)| a / b).collect();
    let tu = u.trace();
    let tv = v.trace();
    let nd: Vec<f64> = (0..mesh.n_boundary())
        .map(|k| (tv[k] * u.normal_derivative[k] - tu[k] * v.normal_derivative[k]) / (tv[k] * tv[k]))
        .collect();
    // weighted stiffness with v² averaged per element
    let mut r = vec![0.0; mesh.n_nodes()];
    let mut scale = vec![0.0; mesh.n_nodes()];
    for (e, t) in mesh.triangles.iter().enumerate() {
        let g = shape_gradients(&mesh, e);
        let w = t.iter().map(|&n| v.values[n] * v.values[n]).sum::<f64>() / 3.0 * mesh.area(e);
        for i in 0..3 {
            for j in 0..3 {
                let kij = w * g[i].dot(&g[j]);
                r[t[i]] += kij * zv[t[j]];
                scale[t[i]] += kij.abs() * zv[t[j]].abs();
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..mesh.n_nodes() {
        if !mesh.is_boundary(i) {
            num += r[i] * r[i];
            den += scale[i] * scale[i];
        }
    }
    let weighted_residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    let chain = mesh.side_chain(Side::I);
    let skip = JUNCTION_SKIP.min(chain.len() / 2);
    let neumann_defect = chain[skip..chain.len() - skip]
        .iter()
        .map(|&k| (tv[k] * u.normal_derivative[k] - tu[k] * v.normal_derivative[k]).abs())
        .fold(0.0, f64::max);
    Ok(QuotientField {
        z: DiscreteField::from_parts(mesh, zv, nd, None),
        weighted_residual,
        neumann_defect,
    })
}
