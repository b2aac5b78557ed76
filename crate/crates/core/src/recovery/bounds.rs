use serde::Serialize;

use crate::error::{Error, Result};

/// Minimized two-term interpolation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationBound {
    pub bound: f64,
    pub r_star: f64,
    pub delta_prime: f64,
    /// Whether the minimizer is the interior stationary point rather than
    /// the cap.
    pub interior: bool,
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} = {v} must be positive and finite")));
        }
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("Hölder exponent {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

/// `φ(r) = ε M K² r^{−2K} + E r^α`, the polynomial-vanishing tradeoff.
pub fn weighted_tradeoff(r: f64, eps: f64, m: f64, k: f64, alpha: f64, e: f64) -> f64 {
    eps * m * k * k * r.powf(-2.0 * k) + e * r.powf(alpha)
}

/// Minimum of [`weighted_tradeoff`] over `r ∈ (0, r2)`, with the exponent
/// `δ′ = α/(2K + α)` of its small-ε behaviour.
pub fn weighted_interpolation_bound(eps: f64, m: f64, k: f64, alpha: f64, e: f64, r2: f64) -> Result<InterpolationBound> {
    check_positive(&[("ε", eps), ("M", m), ("K", k), ("E", e), ("r2", r2)])?;
    check_alpha(alpha)?;
    // φ′(r) = 0 ⇔ r^{α+2K} = 2K³εM / (αE)
    let stationary = (2.0 * k.powi(3) * eps * m / (alpha * e)).powf(1.0 / (alpha + 2.0 * k));
    let interior = stationary < r2;
    let r_star = if interior { stationary } else { r2 };
    Ok(InterpolationBound {
        bound: weighted_tradeoff(r_star, eps, m, k, alpha, e),
        r_star,
        delta_prime: alpha / (2.0 * k + alpha),
        interior,
    })
}

/// Minimized doubly-logarithmic tradeoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoglogBound {
    pub bound: f64,
    pub r_star: f64,
    pub interior: bool,
}

/// `ln` of the first term of [`loglog_tradeoff`].
fn loglog_log_first(r: f64, eps: f64, m: f64, k: f64) -> f64 {
    (eps * m).ln() + 2.0 * k * r.powf(-k)
}

/// `ψ(r) = ε M exp(2K r^{−K}) + E r^α`: the exponential weight lower bound
/// `‖w‖²_{L²(Δ_r)} ≥ exp(−2K r^{−K})` turned into `∫_{Δ_r} w ≥ exp(−2K r^{−K})/M`.
/// Overflow gives `+∞`.
pub fn loglog_tradeoff(r: f64, eps: f64, m: f64, k: f64, alpha: f64, e: f64) -> f64 {
    let l = loglog_log_first(r, eps, m, k);
    if l > 709.0 {
        return f64::INFINITY;
    }
    l.exp() + e * r.powf(alpha)
}

/// Minimum of [`loglog_tradeoff`] over `r ∈ (0, r1)`; `+∞` when every `r`
/// overflows.
pub fn loglog_interpolation_bound(eps: f64, m: f64, k: f64, alpha: f64, e: f64, r1: f64) -> Result<LoglogBound> {
    check_positive(&[("ε", eps), ("M", m), ("K", k), ("E", e), ("r1", r1)])?;
    check_alpha(alpha)?;
    // ψ′ has the sign of g(r) = ln(2K²εM/(αE)) + 2K r^{−K} − (K + α) ln r
    // reversed; g decreases strictly, so its root is the unique minimizer
    let c = (2.0 * k * k * eps * m / (alpha * e)).ln();
    let g = |ln_r: f64| c + 2.0 * k * (-k * ln_r).exp() - (k + alpha) * ln_r;
    let hi0 = r1.ln();
    let (r_star, interior) = if g(hi0) >= 0.0 {
        (r1, false)
    } else {
        let mut hi = hi0;
        let mut lo = hi0 - 1.0;
        while g(lo) < 0.0 {
            lo -= 2.0 * (hi0 - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi0.abs().max(1.0) {
                break;
            }
        }
        (0.5 * (lo + hi), true)
    };
    let r_star = if interior { r_star.exp() } else { r_star };
    let bound = loglog_tradeoff(r_star, eps, m, k, alpha, e);
    Ok(LoglogBound { bound, r_star, interior })
}
