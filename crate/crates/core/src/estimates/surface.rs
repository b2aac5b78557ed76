use crate::error::{Error, Result};
use crate::forward::DiscreteField;
use crate::geometry::{Domain, Vec2};
use crate::quadrature::{integrate_abs_power_linear, SingularIntegral, GAUSS3};

/// Boundary nodes a surface ball must contain to count as resolved.
pub const MIN_BALL_NODES: usize = 8;

/// Portion `[t0, t1] ⊂ [0, 1]` of the segment `a → b` inside the open disk.
fn clip(a: Vec2, b: Vec2, x0: &Vec2, r: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let f = a - x0;
    let qa = d.norm_squared();
    let qb = 2.0 * f.dot(&d);
    let qc = f.norm_squared() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 || qa == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    (t1 > t0).then_some((t0, t1))
}

/// Pieces of the mesh boundary inside `B_r(x0)`: `(length, u_start, u_end)`
/// of the linear trace on each clipped edge.
pub(crate) fn ball_pieces(field: &DiscreteField, x0: &Vec2, r: f64) -> Vec<(f64, f64, f64)> {
    let mesh = &field.mesh;
    let nb = mesh.n_boundary();
    let mut out = Vec::new();
    for k in 0..nb {
        let (i, j) = (mesh.boundary[k], mesh.boundary[(k + 1) % nb]);
        let (a, b) = (mesh.nodes[i], mesh.nodes[j]);
        if let Some((t0, t1)) = clip(a, b, x0, r) {
            let (ua, ub) = (field.values[i], field.values[j]);
            let l = (b - a).norm() * (t1 - t0);
            out.push((l, ua + (ub - ua) * t0, ua + (ub - ua) * t1));
        }
    }
    out
}

/// `∫_{Δ_r(x0)} u²` on the mesh boundary.
pub fn surface_l2_sq(field: &DiscreteField, x0: &Vec2, r: f64) -> f64 {
    ball_pieces(field, x0, r)
        .iter()
        .map(|&(l, a, b)| GAUSS3.integrate(0.0, 1.0, |t| (a + (b - a) * t).powi(2)) * l)
        .sum()
}

/// `|Δ_r(x0)|` on the mesh boundary.
pub fn surface_measure(field: &DiscreteField, x0: &Vec2, r: f64) -> f64 {
    ball_pieces(field, x0, r).iter().map(|p| p.0).sum()
}

/// `∫_{Δ_r(x0)} |u|^{−β}` with exact zero handling.
pub fn surface_negative_power(field: &DiscreteField, x0: &Vec2, r: f64, beta: f64) -> SingularIntegral {
    ball_pieces(field, x0, r)
        .iter()
        .fold(SingularIntegral::Finite(0.0), |acc, &(l, a, b)| {
            acc + integrate_abs_power_linear(a, b, l, beta)
        })
}

fn boundary_distances(field: &DiscreteField, x0: &Vec2) -> Vec<f64> {
    let mesh = &field.mesh;
    let mut d: Vec<f64> = mesh.boundary.iter().map(|&n| (mesh.nodes[n] - x0).norm()).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Rejects a ball holding fewer than [`MIN_BALL_NODES`] boundary nodes.
pub(crate) fn require_resolved(field: &DiscreteField, x0: &Vec2, r: f64) -> Result<()> {
    let d = boundary_distances(field, x0);
    let inside = d.iter().filter(|&&v| v <= r * (1.0 + 1e-12)).count();
    if inside < MIN_BALL_NODES {
        let min_radius = d.get(MIN_BALL_NODES - 1).copied().unwrap_or(f64::INFINITY);
        return Err(Error::UnderResolved {
            radius: r,
            min_radius,
            required: MIN_BALL_NODES,
        });
    }
    Ok(())
}

/// Checks `x0 ∈ Γ_I^{r0}` and that `Δ_{r}(x0)` stays inside Γ_I;
/// returns the snapped center.
pub(crate) fn require_inaccessible_center(domain: &Domain, x0: &Vec2, r: f64) -> Result<Vec2> {
    let s = domain.snap(x0)?;
    let tol = 1e-9 * domain.length();
    if !domain.margin_i_r0().contains_closed(s, tol) {
        return Err(Error::OutsideRegime(format!(
            "center ({}, {}) is not in Γ_I^r0",
            x0.x, x0.y
        )));
    }
    if !domain.ball_within_gamma_i(x0, r) {
        return Err(Error::OutsideRegime(format!(
            "Δ_{r}({}, {}) reaches Γ_A",
            x0.x, x0.y
        )));
    }
    Ok(domain.curve.point_at(s))
}

/// The admissible radius window `[4h, min(r̄, dist(x0, Γ_A)/2)]`.
pub fn admissible_window(field: &DiscreteField, domain: &Domain, x0: &Vec2, r_bar: f64) -> (f64, f64) {
    let lo = 4.0 * field.mesh.h;
    let hi = r_bar.min(0.5 * domain.distance_to(x0, crate::geometry::Side::A));
    (lo, hi)
}

/// Geometric grid from `r_max` down to `r_min`.
pub(crate) fn radius_grid(r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0) || !(r_max >= r_min) || n == 0 {
        return Err(Error::InvalidInput(format!(
            "radius grid needs 0 < r_min ≤ r_max and n ≥ 1 (got {r_min}, {r_max}, {n})"
        )));
    }
    if n == 1 {
        return Ok(vec![r_max]);
    }
    let q = (r_min / r_max).ln() / (n - 1) as f64;
    Ok((0..n).map(|j| r_max * (q * j as f64).exp()).collect())
}
