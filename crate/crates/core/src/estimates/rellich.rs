use std::sync::Arc;

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{sample_edges, solve_boundary_problem, BoundaryProblem, DiscreteField, Normalization};
use crate::geometry::Vec2;
use crate::mesh::TriMesh;

/// Largest interior residual accepted as discretely harmonic.
pub const HARMONIC_TOLERANCE: f64 = 1e-6;

/// Both sides of the normal and tangential boundary norm inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RellichReport {
    /// `‖∂v/∂ν‖²_{L²(∂Ω)}`.
    pub normal_sq: f64,
    /// `‖∇_T v‖²_{L²(∂Ω)}`.
    pub tangential_sq: f64,
    /// `‖v‖²_{H¹(Ω)}`.
    pub h1_sq: f64,
    /// `‖∂v/∂ν‖² / (‖∇_T v‖² + ‖v‖²_{H¹})`.
    pub normal_ratio: f64,
    /// `‖∇_T v‖² / (‖∂v/∂ν‖² + ‖v‖²_{H¹})`.
    pub tangential_ratio: f64,
}

impl RellichReport {
    /// Smallest constant for which both inequalities hold on this field.
    pub fn required_c(&self) -> f64 {
        self.normal_ratio.max(self.tangential_ratio)
    }

    pub fn holds_with(&self, c: f64) -> bool {
        let slack = 1e-12 * (self.normal_sq + self.tangential_sq + self.h1_sq);
        self.normal_sq <= c * (self.tangential_sq + self.h1_sq) + slack
            && self.tangential_sq <= c * (self.normal_sq + self.h1_sq) + slack
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn rellich_audit(field: &DiscreteField) -> Result<RellichReport> {
    let residual = field.harmonic_residual();
    if !(residual <= HARMONIC_TOLERANCE) {
        return Err(Error::NotHarmonic { residual });
    }
    let normal_sq = field.normal_l2_sq(None);
    let tangential_sq = field.tangential_l2_sq(None);
    let h1_sq = field.h1_norm_sq();
    Ok(RellichReport {
        normal_sq,
        tangential_sq,
        h1_sq,
        normal_ratio: ratio(normal_sq, tangential_sq + h1_sq),
        tangential_ratio: ratio(tangential_sq, normal_sq + h1_sq),
    })
}

/// A harmonic polynomial: `y + 2`, or the real or imaginary part of
/// `((x − c)/R)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HarmonicPolynomial {
    Affine,
    Real { degree: u32, center: Vec2, scale: f64 },
    Imag { degree: u32, center: Vec2, scale: f64 },
}

impl HarmonicPolynomial {
    pub fn name(&self) -> String {
        match self {
            HarmonicPolynomial::Affine => "y+2".into(),
            HarmonicPolynomial::Real { degree, .. } => format!("re_z{degree}"),
            HarmonicPolynomial::Imag { degree, .. } => format!("im_z{degree}"),
        }
    }

    /// Value and gradient at `x`.
    pub fn eval(&self, x: Vec2) -> (f64, Vec2) {
        let (n, c, s, imag) = match *self {
            HarmonicPolynomial::Affine => return (x.y + 2.0, Vec2::new(0.0, 1.0)),
            HarmonicPolynomial::Real { degree, center, scale } => (degree, center, scale, false),
            HarmonicPolynomial::Imag { degree, center, scale } => (degree, center, scale, true),
        };
        let w = Complex::new((x.x - c.x) / s, (x.y - c.y) / s);
        let v = w.powu(n);
        let d = w.powu(n - 1) * (n as f64 / s);
        if imag {
            (v.im, Vec2::new(d.im, d.re))
        } else {
            (v.re, Vec2::new(d.re, -d.im))
        }
    }
}

/// `y + 2` and the real and imaginary parts of `w, w², …, w⁴` plus `Re w⁵`,
/// with `w = (x − c)/R`.
pub fn harmonic_suite(center: Vec2, scale: f64) -> Vec<HarmonicPolynomial> {
    let mut out = vec![HarmonicPolynomial::Affine];
    for degree in 1..=4 {
        out.push(HarmonicPolynomial::Real { degree, center, scale });
        out.push(HarmonicPolynomial::Imag { degree, center, scale });
    }
    out.push(HarmonicPolynomial::Real { degree: 5, center, scale });
    out
}

/// Discrete harmonic field with the boundary behaviour of `p`, from the
/// Robin problem `∂u/∂ν + u = ∂p/∂ν + p` on all of ∂Ω.
pub fn harmonic_field(mesh: &Arc<TriMesh>, p: &HarmonicPolynomial) -> Result<DiscreteField> {
    let length = mesh.perimeter();
    let flux = sample_edges(mesh, length, |x, nu, _| {
        let (v, g) = p.eval(x);
        g.dot(&nu) + v
    });
    let problem = BoundaryProblem {
        flux,
        robin: vec![[1.0; 2]; mesh.n_boundary()],
    };
    solve_boundary_problem(mesh, &problem, Normalization::ZeroMean)
}

#[derive(Debug, Clone, Serialize)]
pub struct RellichCalibration {
    pub names: Vec<String>,
    pub reports: Vec<RellichReport>,
    /// Smallest `C` making every inequality of the suite hold.
    pub fitted_c: f64,
}

impl RellichCalibration {
    pub fn all_hold(&self) -> bool {
        self.reports.iter().all(|r| r.holds_with(self.fitted_c))
    }
}

/// Audits every member of `suite` on `mesh` and fits the common constant.
pub fn rellich_calibration(mesh: &Arc<TriMesh>, suite: &[HarmonicPolynomial]) -> Result<RellichCalibration> {
    if suite.is_empty() {
        return Err(Error::InvalidInput("empty harmonic suite".into()));
    }
    let mut reports = Vec::with_capacity(suite.len());
    for p in suite {
        reports.push(rellich_audit(&harmonic_field(mesh, p)?)?);
    }
    let fitted_c = reports.iter().map(RellichReport::required_c).fold(0.0, f64::max);
    Ok(RellichCalibration {
        names: suite.iter().map(HarmonicPolynomial::name).collect(),
        reports,
        fitted_c,
    })
}
