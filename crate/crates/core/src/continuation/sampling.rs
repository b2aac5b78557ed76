use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forward::{fmt, edge_params, DiscreteField, NeumannFlux};
use crate::geometry::{Domain, Side, Vec2};
use crate::quadrature::GAUSS3;

/// Quadrature samples on one boundary arc.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSampling {
    pub side: Side,
    /// Curve parameter of each sample.
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Outward unit normals.
    pub normals: Vec<Vec2>,
    /// Quadrature weights (arclength).
    pub weights: Vec<f64>,
}

impl ArcSampling {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Offsets of the samples from the start of their arc.
    pub fn offsets(&self, domain: &Domain) -> Vec<f64> {
        let arc = domain.arc(self.side);
        let len = domain.length();
        self.params
            .iter()
            .map(|&s| {
                let d = (s - arc.start).rem_euclid(len);
                if d > arc.span + 1e-9 * len { d - len } else { d }
            })
            .collect()
    }

    /// `(Σ w f²)^{1/2}`.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }

    /// Three Gauss points per mesh edge of the chosen arc, placed on the
    /// curve with the curve normal there and weighted by edge length.
    pub fn gauss_on_mesh(field: &DiscreteField, domain: &Domain, side: Side) -> Self {
        let mesh = &field.mesh;
        let length = domain.length();
        let mut out = ArcSampling {
            side,
            params: Vec::new(),
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
        };
        for k in mesh.side_edges(side) {
            let (sa, sb) = edge_params(mesh, k, length);
            let l = mesh.edge_length(k);
            for (t, w) in GAUSS3.mapped(0.0, 1.0) {
                let s = domain.curve.wrap(sa + (sb - sa) * t);
                out.params.push(s);
                out.points.push(domain.curve.point_at(s));
                out.normals.push(domain.curve.normal_at(s));
                out.weights.push(w * l);
            }
        }
        out
    }

    /// Mesh nodes of the closed arc with trapezoid weights; normals come
    /// from the curve, one-sided at the arc ends.
    pub fn nodes_on_mesh(field: &DiscreteField, domain: &Domain, side: Side) -> Self {
        let mesh = &field.mesh;
        let chain = mesh.side_chain(side);
        let n = chain.len();
        let mut out = ArcSampling {
            side,
            params: Vec::with_capacity(n),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: vec![0.0; n],
        };
        for (i, &k) in chain.iter().enumerate() {
            out.params.push(mesh.boundary_param[k]);
            out.points.push(mesh.nodes[mesh.boundary[k]]);
            let nu = if i == 0 {
                mesh.edge_normal(k)
            } else if i + 1 == n {
                mesh.edge_normal(chain[i - 1])
            } else {
                domain.curve.normal_at(mesh.boundary_param[k])
            };
            out.normals.push(nu);
            if i + 1 < n {
                let l = mesh.edge_length(k);
                out.weights[i] += 0.5 * l;
                out.weights[i + 1] += 0.5 * l;
            }
        }
        out
    }

    /// `n + 1` equispaced nodes (in arclength) of the closed arc with
    /// trapezoid weights.
    pub fn uniform(domain: &Domain, side: Side, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("uniform sampling needs n ≥ 2".into()));
        }
        let arc = domain.arc(side);
        let h = arc.span / n as f64;
        let eps = 1e-9 * arc.span;
        let mut out = ArcSampling {
            side,
            params: Vec::new(),
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
        };
        for i in 0..=n {
            let s = arc.start + h * i as f64;
            let one_sided = if i == 0 { s + eps } else if i == n { s - eps } else { s };
            out.params.push(domain.curve.wrap(s));
            out.points.push(domain.curve.point_at(s));
            out.normals.push(domain.curve.normal_at(one_sided));
            out.weights.push(if i == 0 || i == n { 0.5 * h } else { h });
        }
        Ok(out)
    }

    /// Gauss points on `n` equal arclength cells of the arc, on the curve.
    pub fn gauss_on_curve(domain: &Domain, side: Side, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one cell".into()));
        }
        let arc = domain.arc(side);
        let h = arc.span / n as f64;
        let mut out = ArcSampling {
            side,
            params: Vec::new(),
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
        };
        for c in 0..n {
            for (s, w) in GAUSS3.mapped(arc.start + c as f64 * h, arc.start + (c + 1) as f64 * h) {
                out.params.push(domain.curve.wrap(s));
                out.points.push(domain.curve.point_at(s));
                out.normals.push(domain.curve.normal_at(s));
                out.weights.push(w);
            }
        }
        Ok(out)
    }

    pub(crate) fn matches(&self, other: &ArcSampling, tol: f64) -> bool {
        self.side == other.side
            && self.len() == other.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Dirichlet and Neumann data on Γ_A.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub sampling: ArcSampling,
    pub dirichlet: Vec<f64>,
    pub neumann: Vec<f64>,
    /// Weighted `L²(Γ_A)` norm of the injected Dirichlet perturbation.
    pub noise_level: f64,
}

impl CauchyData {
    /// Samples a solved field at the Gauss points of its Γ_A edges. The
    /// Neumann data are the prescribed flux when given, else the recovered
    /// normal derivative.
    pub fn from_field(field: &DiscreteField, domain: &Domain, flux: Option<&NeumannFlux>) -> Self {
        let mesh = &field.mesh;
        let sampling = ArcSampling::gauss_on_mesh(field, domain, Side::A);
        let trace = field.trace();
        let nb = mesh.n_boundary();
        let length = domain.length();
        let mut dirichlet = Vec::with_capacity(sampling.len());
        let mut neumann = Vec::with_capacity(sampling.len());
        for k in mesh.side_edges(Side::A) {
            let j = (k + 1) % nb;
            for (t, _) in GAUSS3.mapped(0.0, 1.0) {
                dirichlet.push(trace[k] * (1.0 - t) + trace[j] * t);
                let g = match flux {
                    Some(g) => {
                        let (sa, sb) = edge_params(mesh, k, length);
                        g.value_at(sa + (sb - sa) * t, length)
                    }
                    None => field.normal_derivative[k] * (1.0 - t) + field.normal_derivative[j] * t,
                };
                neumann.push(g);
            }
        }
        CauchyData {
            sampling,
            dirichlet,
            neumann,
            noise_level: 0.0,
        }
    }

    /// Exact data of `u` (with gradient `grad`) at Gauss points of `cells`
    /// equal cells of Γ_A on the curve.
    pub fn from_analytic(
        domain: &Domain,
        cells: usize,
        u: impl Fn(Vec2) -> f64,
        grad: impl Fn(Vec2) -> Vec2,
    ) -> Result<Self> {
        let sampling = ArcSampling::gauss_on_curve(domain, Side::A, cells)?;
        let dirichlet = sampling.points.iter().map(|p| u(*p)).collect();
        let neumann = sampling
            .points
            .iter()
            .zip(&sampling.normals)
            .map(|(p, n)| grad(*p).dot(n))
            .collect();
        Ok(CauchyData {
            sampling,
            dirichlet,
            neumann,
            noise_level: 0.0,
        })
    }

    /// Adds i.i.d. Gaussian noise to the Dirichlet samples, rescaled so that
    /// its weighted `L²(Γ_A)` norm is exactly `eps`.
    pub fn with_noise(&self, eps: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInput(format!("noise level {eps} must be nonnegative")));
        }
        let mut out = self.clone();
        if eps == 0.0 {
            return Ok(out);
        }
        let raw: Vec<f64> = (0..self.sampling.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = self.sampling.l2_norm(&raw);
        if norm == 0.0 {
            return Err(Error::Degenerate("noise draw vanished".into()));
        }
        for (d, n) in out.dirichlet.iter_mut().zip(&raw) {
            *d += eps * n / norm;
        }
        out.noise_level = (self.noise_level.powi(2) + eps * eps).sqrt();
        Ok(out)
    }

    /// CSV with columns `s,dirichlet,neumann,weight,x,y,nx,ny`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "dirichlet", "neumann", "weight", "x", "y", "nx", "ny"])?;
        let s = &self.sampling;
        for i in 0..s.len() {
            wr.write_record([
                fmt(s.params[i]),
                fmt(self.dirichlet[i]),
                fmt(self.neumann[i]),
                fmt(s.weights[i]),
                fmt(s.points[i].x),
                fmt(s.points[i].y),
                fmt(s.normals[i].x),
                fmt(s.normals[i].y),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`CauchyData::write_csv`]. Only `s`,
    /// `dirichlet` and `neumann` are required; missing geometry columns are
    /// filled from the curve and missing weights from midpoint spacing.
    pub fn read_csv(r: impl Read, domain: &Domain) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (cs, cd, cn) = match (col("s"), col("dirichlet"), col("neumann")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(Error::Parse("Cauchy CSV needs s, dirichlet, neumann columns".into())),
        };
        let geo = [col("weight"), col("x"), col("y"), col("nx"), col("ny")];
        let mut params = Vec::new();
        let mut dirichlet = Vec::new();
        let mut neumann = Vec::new();
        let mut extra: Vec<[f64; 5]> = Vec::new();
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{v}'")));
        for rec in rd.records() {
            let rec = rec?;
            params.push(num(&rec[cs])?);
            dirichlet.push(num(&rec[cd])?);
            neumann.push(num(&rec[cn])?);
            let mut e = [f64::NAN; 5];
            for (slot, c) in e.iter_mut().zip(geo) {
                if let Some(c) = c {
                    *slot = num(&rec[c])?;
                }
            }
            extra.push(e);
        }
        let n = params.len();
        if n == 0 {
            return Err(Error::Parse("Cauchy CSV has no rows".into()));
        }
        let mut sampling = ArcSampling {
            side: Side::A,
            params: params.clone(),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        for i in 0..n {
            let e = extra[i];
            let p = if e[1].is_nan() { domain.curve.point_at(params[i]) } else { Vec2::new(e[1], e[2]) };
            let nu = if e[3].is_nan() { domain.curve.normal_at(params[i]) } else { Vec2::new(e[3], e[4]) };
            let w = if e[0].is_nan() {
                let lo = if i > 0 { params[i - 1] } else { params[i] };
                let hi = if i + 1 < n { params[i + 1] } else { params[i] };
                0.5 * (hi - lo).abs().max(if n == 1 { domain.gamma_a.span } else { 0.0 })
            } else {
                e[0]
            };
            sampling.points.push(p);
            sampling.normals.push(nu);
            sampling.weights.push(w);
        }
        Ok(CauchyData {
            sampling,
            dirichlet,
            neumann,
            noise_level: 0.0,
        })
    }
}
