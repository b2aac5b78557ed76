use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Side, Vec2};
use crate::mesh::TriMesh;
use crate::quadrature::GAUSS3;

/// Values of a boundary function at the three Gauss points of each loop edge.
pub type EdgeSamples = Vec<[f64; 3]>;

/// Samples `f(x, ν, s)` at the Gauss points of every loop edge; `s` is the
/// curve parameter interpolated along the edge.
pub fn sample_edges<F>(mesh: &TriMesh, length: f64, mut f: F) -> EdgeSamples
where
    F: FnMut(Vec2, Vec2, f64) -> f64,
{
    (0..mesh.n_boundary())
        .map(|k| {
            let (a, b) = mesh.edge(k);
            let (sa, sb) = edge_params(mesh, k, length);
            let nu = mesh.edge_normal(k);
            let mut out = [0.0; 3];
            for (q, (t, _)) in GAUSS3.mapped(0.0, 1.0).enumerate() {
                let x = mesh.nodes[a] + (mesh.nodes[b] - mesh.nodes[a]) * t;
                out[q] = f(x, nu, sa + (sb - sa) * t);
            }
            out
        })
        .collect()
}

/// Curve parameters at the ends of loop edge `k`, unwrapped so that the end
/// exceeds the start.
pub fn edge_params(mesh: &TriMesh, k: usize, length: f64) -> (f64, f64) {
    let n = mesh.n_boundary();
    let sa = mesh.boundary_param[k];
    let mut sb = mesh.boundary_param[(k + 1) % n];
    if sb <= sa {
        sb += length;
    }
    (sa, sb)
}

/// One linear piece of a boundary flux, in curve arclength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPiece {
    pub from: f64,
    pub to: f64,
    pub start_value: f64,
    pub end_value: f64,
}

/// Prescribed current flux `g` on the accessible arc: piecewise linear in
/// arclength with jumps allowed between pieces, zero outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannFlux {
    pub pieces: Vec<FluxPiece>,
    /// Declared `r̂`: the support should avoid the `r̂`-neighbourhood of Γ_I.
    pub support_margin: f64,
    /// Declared bound `E` on the `C^{0,α}` norm.
    pub holder_bound: f64,
    pub holder_exponent: f64,
}

/// Findings of [`NeumannFlux::admissibility`]; violations are warnings, not
/// errors, so that out-of-class experiments remain possible.
#[derive(Debug, Clone, Default)]
pub struct FluxReport {
    pub holder_norm: f64,
    pub support_distance: f64,
    pub warnings: Vec<String>,
}

impl NeumannFlux {
    pub fn new(pieces: Vec<FluxPiece>, support_margin: f64, holder_bound: f64, holder_exponent: f64) -> Result<Self> {
        for p in &pieces {
            if !(p.to > p.from) {
                return Err(Error::InvalidInput(format!(
                    "flux piece [{}, {}] is empty",
                    p.from, p.to
                )));
            }
        }
        if !(holder_exponent > 0.0 && holder_exponent <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "Hölder exponent {holder_exponent} must lie in (0, 1]"
            )));
        }
        Ok(NeumannFlux {
            pieces,
            support_margin,
            holder_bound,
            holder_exponent,
        })
    }

    /// Constant `value` on `[from, to]`.
    pub fn constant_on(from: f64, to: f64, value: f64) -> Self {
        NeumannFlux {
            pieces: vec![FluxPiece {
                from,
                to,
                start_value: value,
                end_value: value,
            }],
            support_margin: 0.0,
            holder_bound: f64::INFINITY,
            holder_exponent: 1.0,
        }
    }

    /// Value at curve parameter `s` (first matching piece, wrapped).
    pub fn value_at(&self, s: f64, length: f64) -> f64 {
        for p in &self.pieces {
            let d = (s - p.from).rem_euclid(length);
            let span = p.to - p.from;
            if d <= span {
                return p.start_value + (p.end_value - p.start_value) * d / span;
            }
        }
        0.0
    }

    /// Gauss samples on the accessible edges, zero on Γ_I edges.
    pub fn sample(&self, mesh: &TriMesh, domain: &Domain) -> EdgeSamples {
        let length = domain.length();
        let mut out = sample_edges(mesh, length, |_, _, s| self.value_at(s, length));
        for k in mesh.side_edges(Side::I).collect::<Vec<_>>() {
            out[k] = [0.0; 3];
        }
        out
    }

    /// Checks support, Hölder norm and jumps on a dense sample of Γ_A.
    pub fn admissibility(&self, domain: &Domain) -> FluxReport {
        let length = domain.length();
        let a = domain.gamma_a;
        let n = 2000;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let s = a.start + a.span * k as f64 / n as f64;
                (s, self.value_at(s, length))
            })
            .collect();
        let mut report = FluxReport {
            support_distance: f64::INFINITY,
            ..FluxReport::default()
        };
        let alpha = self.holder_exponent;
        let sup = pts.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
        let mut semi: f64 = 0.0;
        for i in 0..pts.len() {
            if pts[i].1 != 0.0 {
                let x = domain.curve.point_at(pts[i].0);
                report.support_distance = report.support_distance.min(domain.distance_to(&x, Side::I));
            }
            for j in (i + 1..pts.len()).step_by(7) {
                let d = (domain.curve.point_at(pts[j].0) - domain.curve.point_at(pts[i].0)).norm();
                if d > 0.0 {
                    semi = semi.max((pts[j].1 - pts[i].1).abs() / d.powf(alpha));
                }
            }
        }
        let jumps = self
            .pieces
            .iter()
            .flat_map(|p| [(p.from, p.start_value), (p.to, p.end_value)])
            .filter(|&(s, v)| {
                let eps = 1e-9 * length;
                v != 0.0 && (self.value_at(s - eps, length) - self.value_at(s + eps, length)).abs() > 1e-12
            })
            .count();
        report.holder_norm = sup + domain.r0().powf(alpha) * semi;
        if jumps > 0 {
            report
                .warnings
                .push(format!("flux has {jumps} jump(s); it is not C^{{0,{alpha}}}"));
        }
        if report.holder_norm > self.holder_bound {
            report.warnings.push(format!(
                "sampled C^{{0,{alpha}}} norm {:.4e} exceeds E = {:.4e}",
                report.holder_norm, self.holder_bound
            ));
        }
        if report.support_distance <= self.support_margin {
            report.warnings.push(format!(
                "flux support comes within {:.4e} of Γ_I (r̂ = {:.4e})",
                report.support_distance, self.support_margin
            ));
        }
        report
    }
}

/// Nonnegative Lipschitz Robin coefficient on Γ_I, piecewise linear in the
/// arclength offset from the start of Γ_I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinCoefficient {
    /// `(offset, value)` knots sorted by offset; constant extension outside.
    pub knots: Vec<(f64, f64)>,
    /// A priori bound `γ0` on the `C^{0,1}` norm.
    pub gamma0: f64,
}

impl RobinCoefficient {
    pub fn constant(value: f64, gamma0: f64) -> Self {
        RobinCoefficient {
            knots: vec![(0.0, value)],
            gamma0,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn piecewise_linear(mut knots: Vec<(f64, f64)>, gamma0: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidInput("Robin coefficient needs at least one knot".into()));
        }
        knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("Robin knots must have distinct offsets".into()));
        }
        Ok(RobinCoefficient { knots, gamma0 })
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if t <= w[1].0 {
                return w[0].1 + (w[1].1 - w[0].1) * (t - w[0].0) / (w[1].0 - w[0].0);
            }
        }
        k[k.len() - 1].1
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|k| k.1 == 0.0)
    }

    pub fn sup(&self) -> f64 {
        self.knots.iter().fold(0.0, |m, k| m.max(k.1.abs()))
    }

    pub fn lipschitz(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }

    /// `‖γ‖_∞ + r0 · Lip(γ)`.
    pub fn c01_norm(&self, r0: f64) -> f64 {
        self.sup() + r0 * self.lipschitz()
    }

    /// Enforces `γ ≥ 0` and `‖γ‖_{C^{0,1}} ≤ γ0`.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if let Some(k) = self.knots.iter().find(|k| k.1 < 0.0) {
            return Err(Error::InvalidInput(format!(
                "Robin coefficient is negative ({}) at offset {}",
                k.1, k.0
            )));
        }
        let norm = self.c01_norm(domain.r0());
        if norm > self.gamma0 * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "Robin coefficient C^{{0,1}} norm {norm:.6} exceeds γ0 = {}",
                self.gamma0
            )));
        }
        Ok(())
    }

    /// Values at the ends of every loop edge (zero on accessible edges).
    pub fn edge_values(&self, mesh: &TriMesh, domain: &Domain) -> Vec<[f64; 2]> {
        let length = domain.length();
        let start = domain.gamma_i.start;
        (0..mesh.n_boundary())
            .map(|k| {
                if mesh.edge_side[k] != Side::I {
                    return [0.0; 2];
                }
                let (sa, sb) = edge_params(mesh, k, length);
                let ta = (sa - start).rem_euclid(length);
                let ta = if ta > domain.gamma_i.span { ta - length } else { ta };
                let tb = ta + (sb - sa);
                [self.value(ta), self.value(tb)]
            })
            .collect()
    }

    /// Nodal values per loop position; zero off the closed inaccessible arc.
    pub fn nodal(&self, mesh: &TriMesh, domain: &Domain) -> Vec<f64> {
        let length = domain.length();
        let tol = 1e-9 * length;
        mesh.boundary_param
            .iter()
            .map(|&s| {
                domain
                    .gamma_i
                    .offset_of(s, length, tol)
                    .map_or(0.0, |t| self.value(t))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::unit_square;
    use crate::mesh::MeshKind;

    #[test]
    fn robin_norm_and_validation() {
        let d = unit_square();
        let g = RobinCoefficient::piecewise_linear(vec![(0.0, 0.5), (1.0, 1.0)], 1.0).unwrap();
        assert!((g.c01_norm(0.25) - (1.0 + 0.25 * 0.5)).abs() < 1e-15);
        assert!(g.validate(&d).is_err());
        let ok = RobinCoefficient { gamma0: 1.2, ..g };
        assert!(ok.validate(&d).is_ok());
        let neg = RobinCoefficient::constant(-0.1, 1.0);
        assert!(neg.validate(&d).is_err());
        assert!((ok.value(0.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn robin_edge_values_follow_offsets() {
        let d = unit_square();
        let m = TriMesh::generate(&d, 0.25, MeshKind::Auto).unwrap();
        let g = RobinCoefficient::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0)], 2.0).unwrap();
        let ev = g.edge_values(&m, &d);
        let i_edges: Vec<usize> = m.side_edges(Side::I).collect();
        assert_eq!(i_edges.len(), 4);
        for &k in &i_edges {
            let (a, b) = m.edge(k);
            assert!((ev[k][0] - m.nodes[a].x).abs() < 1e-12);
            assert!((ev[k][1] - m.nodes[b].x).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_with_jump_is_flagged() {
        let d = unit_square();
        let g = NeumannFlux::constant_on(2.0, 3.0, 1.0);
        let rep = g.admissibility(&d);
        assert!(rep.warnings.iter().any(|w| w.contains("jump")));
        assert!((g.value_at(2.5, 4.0) - 1.0).abs() < 1e-15);
        assert_eq!(g.value_at(1.5, 4.0), 0.0);
    }
}
