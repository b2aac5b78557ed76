use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{solve_forward_on, DiscreteField, FluxPiece, NeumannFlux, RobinCoefficient};
use crate::geometry::{Domain, Side, Vec2};
use crate::mesh::TriMesh;
use crate::stats::line_fit;

use super::surface::{require_inaccessible_center, require_resolved, surface_l2_sq};

/// `(from, to, start value, end value)` as fractions of Γ_A, then `γ`.
const SUITE: [([f64; 4], f64); 10] = [
    ([1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0], 0.5),
    ([1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0], 1e-3),
    ([1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0], 2.0),
    ([0.05, 0.3, 1.0, 1.0], 0.5),
    ([0.7, 0.95, 1.0, 1.0], 0.5),
    ([0.05, 0.95, 1.0, 1.0], 1.0),
    ([0.1, 0.5, 1.0, 1.0], 0.1),
    ([0.5, 0.9, 1.0, 1.0], 0.25),
    ([0.2, 0.8, 1.0, 1.0], 4.0),
    ([0.05, 0.95, 0.0, 2.0], 0.5),
];

/// The ten solutions of the forward problem used to calibrate the local
/// Cauchy inequality. On the unit square with Γ_I the bottom edge the
/// first member is `y + 2`.
pub fn calibration_suite(mesh: &Arc<TriMesh>, domain: &Domain) -> Result<Vec<DiscreteField>> {
    let a = domain.arc(Side::A);
    SUITE
        .iter()
        .map(|&([f0, f1, v0, v1], gamma)| {
            let piece = FluxPiece {
                from: a.start + f0 * a.span,
                to: a.start + f1 * a.span,
                start_value: v0,
                end_value: v1,
            };
            let g = NeumannFlux::new(vec![piece], 0.0, f64::INFINITY, 1.0)?;
            solve_forward_on(mesh, domain, &g, &RobinCoefficient::constant(gamma, gamma))
        })
        .collect()
}

/// `(∫_{Δ_r} u², ∫_{Γ_{r/2}} u²)` after scaling to `‖u‖_∞ = 1`.
fn local_sides(field: &DiscreteField, domain: &Domain, x0: &Vec2, r: f64) -> Result<(Vec2, f64, f64)> {
    let c = require_inaccessible_center(domain, x0, r)?;
    require_resolved(field, &c, r)?;
    let solid = field.mesh.mask_solid_ball(&c, 0.5 * r)?;
    if solid.under_resolved {
        return Err(Error::UnderResolved {
            radius: r,
            min_radius: 2.0 * field.mesh.min_diameter(),
            required: 1,
        });
    }
    let m = field.max_abs();
    if m == 0.0 {
        return Err(Error::Degenerate("field vanishes identically".into()));
    }
    let u = field.scaled(1.0 / m);
    Ok((c, surface_l2_sq(&u, &c, r), u.l2_norm_sq_on(&solid.elements)))
}

/// Frozen `(δ, C)` of `(∫_{Δ_r} u²)^{δ/2} ≥ C ∫_{Γ_{r/2}} u²`.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyCalibration {
    pub delta: f64,
    pub c: f64,
    /// Regression slope of `ln ∫_Γ` on `ln ∫_Δ`.
    pub slope: f64,
    /// `(surface, solid)` pairs used in the fit.
    pub samples: Vec<(f64, f64)>,
}

/// Fits `δ` by regression over every (field, center, radius) sample and
/// takes the largest `C` that keeps all samples satisfied.
pub fn calibrate_local_cauchy(
    domain: &Domain,
    fields: &[DiscreteField],
    centers: &[Vec2],
    radii: &[f64],
) -> Result<CauchyCalibration> {
    let mut samples = Vec::new();
    for f in fields {
        for x0 in centers {
            for &r in radii {
                let (_, a, b) = local_sides(f, domain, x0, r)?;
                if a > 0.0 && b > 0.0 {
                    samples.push((a, b));
                }
            }
        }
    }
    if samples.len() < 2 {
        return Err(Error::Degenerate("calibration needs two nonzero samples".into()));
    }
    let la: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let lb: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let slope = line_fit(&la, &lb).map_or(0.5, |f| f.slope);
    let delta = (2.0 * slope).clamp(1e-3, 1.0);
    let c = samples
        .iter()
        .map(|&(a, b)| a.powf(0.5 * delta) / b)
        .fold(f64::INFINITY, f64::min);
    Ok(CauchyCalibration {
        delta,
        c,
        slope,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalCauchyReport {
    pub center: Vec2,
    pub radius: f64,
    /// `∫_{Δ_r} u²` of the normalized field.
    pub surface: f64,
    /// `∫_{Γ_{r/2}} u²` of the normalized field.
    pub solid: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Evaluates the calibrated inequality on `field` scaled to `‖u‖_∞ = 1`.
pub fn local_cauchy_bound_check(
    field: &DiscreteField,
    domain: &Domain,
    x0: &Vec2,
    r: f64,
    calibration: &CauchyCalibration,
) -> Result<LocalCauchyReport> {
    let (center, surface, solid) = local_sides(field, domain, x0, r)?;
    let lhs = surface.powf(0.5 * calibration.delta);
    let rhs = calibration.c * solid;
    Ok(LocalCauchyReport {
        center,
        radius: r,
        surface,
        solid,
        lhs,
        rhs,
        satisfied: lhs >= rhs * (1.0 - 1e-12),
    })
}

/// `n` points evenly spread over Γ_I^{r0} by arclength.
pub fn probe_points(domain: &Domain, n: usize) -> Vec<Vec2> {
    let set = domain.margin_i_r0();
    let total = set.measure();
    if n == 0 || total == 0.0 {
        return Vec::new();
    }
    (0..n)
        .filter_map(|j| {
            let mut t = total * (j as f64 + 0.5) / n as f64;
            for &(a, b) in &set.intervals {
                if t <= b - a {
                    return Some(domain.curve.point_at(a + t));
                }
                t -= b - a;
            }
            None
        })
        .collect()
}
