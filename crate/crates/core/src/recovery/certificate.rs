use std::io::Write;

use serde::Serialize;

use crate::continuation::ContinuationResult;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Side};
use crate::quadrature::{integrate_abs_power_linear, SingularIntegral};

use super::gamma::margin_indices;

/// `L^β` error certificate for the reconstructed coefficient on Γ_I^{r0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbetaCertificate {
    pub p: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma0: f64,
    /// Length of the integration region.
    pub arclength: f64,
    /// `∫ |u2|^{−β}` over the region.
    pub negative_power_integral: f64,
    /// `(∫ |γ1 − γ2|^β)^{1/β} ≤ (γ0 + 1) η (∫ |u2|^{−β})^{1/β}`.
    pub lbeta_bound: f64,
    pub l2_bound: f64,
    /// `sup (γ0 + 1) η / |u2|`, the pointwise bound at its worst sample.
    pub linf_pointwise: f64,
    /// `L^∞` from `L²` and the a priori Lipschitz bound `2γ0/r0`.
    pub linf_interpolated: f64,
    /// `min(γ0, linf_pointwise)`, valid without the Lipschitz assumption.
    pub linf_bound: f64,
}

impl LbetaCertificate {
    /// Plain `key = value` report of every constant.
    pub fn write_report(&self, mut w: impl Write) -> Result<()> {
        let rows = [
            ("p", self.p),
            ("beta", self.beta),
            ("eta", self.eta),
            ("gamma0", self.gamma0),
            ("arclength", self.arclength),
            ("negative_power_integral", self.negative_power_integral),
            ("lbeta_bound", self.lbeta_bound),
            ("l2_bound", self.l2_bound),
            ("linf_pointwise", self.linf_pointwise),
            ("linf_interpolated", self.linf_interpolated),
            ("linf_bound", self.linf_bound),
        ];
        for (k, v) in rows {
            writeln!(w, "{k} = {v:.12e}")?;
        }
        Ok(())
    }
}

/// Largest `m` compatible with `‖f‖²_{L²(0,ℓ)} = l2_sq` for `f` with
/// Lipschitz constant `lip` and `|f| = m` somewhere in `[0, ℓ]`.
pub(crate) fn linf_from_l2(l2_sq: f64, lip: f64, ell: f64) -> f64 {
    if l2_sq == 0.0 {
        return 0.0;
    }
    // mass a peak of height m must carry on one side
    let lower = |m: f64| {
        if lip == 0.0 {
            m * m * ell
        } else if m <= lip * ell {
            m.powi(3) / (3.0 * lip)
        } else {
            (m.powi(3) - (m - lip * ell).powi(3)) / (3.0 * lip)
        }
    };
    let mut hi = (l2_sq / ell).sqrt() + lip * ell + (3.0 * lip * l2_sq).cbrt() + 1e-300;
    while lower(hi) < l2_sq {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lower(mid) <= l2_sq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Certificate from the pointwise quotient bound and the `L^β`
/// integrability of `|u2|^{−β}`, `β = 2/(p − 1)`, over the samples of
/// `result` in Γ_I^{r0}. `u2_trace` lives on the same samples.
pub fn recover_gamma_lbeta(
    domain: &Domain,
    result: &ContinuationResult,
    u2_trace: &[f64],
    p: f64,
    eta_eps: f64,
    gamma0: f64,
) -> Result<LbetaCertificate> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("Muckenhoupt exponent {p} must exceed 1")));
    }
    if !(eta_eps >= 0.0) || !(gamma0 >= 0.0) {
        return Err(Error::InvalidInput("η(ε) and γ0 must be nonnegative".into()));
    }
    if result.sampling.side != Side::I || u2_trace.len() != result.sampling.len() {
        return Err(Error::SamplingMismatch("u2 trace must share the Γ_I sampling".into()));
    }
    let beta = 2.0 / (p - 1.0);
    let idx = margin_indices(result, domain.margin_i_r0(), domain);
    if idx.len() < 2 {
        return Err(Error::Degenerate("fewer than two samples in Γ_I^{r0}".into()));
    }
    let off = result.sampling.offsets(domain);
    let mut integral = SingularIntegral::Finite(0.0);
    let mut arclength = 0.0;
    for w in idx.windows(2) {
        if w[1] != w[0] + 1 {
            continue;
        }
        let h = off[w[1]] - off[w[0]];
        arclength += h;
        integral = integral + integrate_abs_power_linear(u2_trace[w[0]], u2_trace[w[1]], h, beta);
    }
    let Some(neg) = integral.value() else {
        return Err(Error::CertificateUnavailable(format!(
            "∫ |u2|^(−{beta:.4}) diverges on Γ_I^{{r0}}; the A_p condition fails at p = {p}"
        )));
    };
    let lbeta_bound = (gamma0 + 1.0) * eta_eps * neg.powf(1.0 / beta);
    let l2_bound = if beta <= 2.0 {
        (2.0 * gamma0).powf(1.0 - beta / 2.0) * lbeta_bound.powf(beta / 2.0)
    } else {
        arclength.powf(0.5 - 1.0 / beta) * lbeta_bound
    };
    let min_u2 = idx.iter().map(|&i| u2_trace[i].abs()).fold(f64::INFINITY, f64::min);
    let linf_pointwise = if min_u2 > 0.0 { (gamma0 + 1.0) * eta_eps / min_u2 } else { f64::INFINITY };
    let shortest = domain
        .margin_i_r0()
        .intervals
        .iter()
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min);
    let lip = 2.0 * gamma0 / domain.r0();
    let linf_interpolated = linf_from_l2(l2_bound * l2_bound, lip, shortest).min(gamma0);
    Ok(LbetaCertificate {
        p,
        beta,
        eta: eta_eps,
        gamma0,
        arclength,
        negative_power_integral: neg,
        lbeta_bound,
        l2_bound,
        linf_pointwise,
        linf_interpolated,
        linf_bound: linf_pointwise.min(gamma0),
    })
}
