use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::continuation::ContinuationResult;
use crate::error::{Error, Result};
use crate::forward::{fmt, RobinCoefficient};
use crate::geometry::{ArcSet, Domain, Side};

/// How small denominators are suppressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FloorMode {
    Absolute { tau: f64 },
    /// The `q`-quantile of `|trace|` over the margin samples.
    Quantile { q: f64 },
    None,
}

/// Norm used for the headline error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NormMode {
    LinftyMargin,
    L2Margin,
    /// `L^β` with `β = 2/(p − 1)`.
    Lbeta { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    pub floor: FloorMode,
    pub norm: NormMode,
    /// Margin ρ of the output set Γ_I^ρ; `None` means `r0`.
    pub margin: Option<f64>,
    /// Upper clamp γ0; `None` leaves the values unbounded above.
    pub gamma0: Option<f64>,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            floor: FloorMode::Quantile { q: 0.05 },
            norm: NormMode::LinftyMargin,
            margin: None,
            gamma0: None,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        match self.floor {
            FloorMode::Absolute { tau } if !(tau > 0.0) => {
                return Err(Error::InvalidInput(format!("absolute floor {tau} must be positive")))
            }
            FloorMode::Quantile { q } if !(q > 0.0 && q < 1.0) => {
                return Err(Error::InvalidInput(format!("quantile {q} must lie in (0, 1)")))
            }
            _ => {}
        }
        if let NormMode::Lbeta { p } = self.norm {
            if !(p > 1.0) {
                return Err(Error::InvalidInput(format!("Muckenhoupt exponent {p} must exceed 1")));
            }
        }
        if let Some(rho) = self.margin {
            if !(rho > 0.0) {
                return Err(Error::InvalidInput(format!("margin {rho} must be positive")));
            }
        }
        if let Some(g) = self.gamma0 {
            if !(g >= 0.0) {
                return Err(Error::InvalidInput(format!("γ0 = {g} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampEvent {
    pub param: f64,
    pub raw: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaError {
    pub linf: f64,
    pub l2: f64,
    /// Error in the configured norm.
    pub selected: f64,
}

/// Reconstructed γ on the margin samples of Γ_I.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub params: Vec<f64>,
    /// Arclength offsets from the start of Γ_I.
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
    /// Clamped values; masked samples hold 0.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub floor: f64,
    pub clamp_events: Vec<ClampEvent>,
    pub error: Option<GammaError>,
}

impl GammaEstimate {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Errors against a known coefficient over the unmasked samples.
    pub fn compare(&mut self, truth: &RobinCoefficient, norm: NormMode) -> GammaError {
        let diff: Vec<(f64, f64)> = (0..self.values.len())
            .filter(|&i| !self.mask[i])
            .map(|i| ((self.values[i] - truth.value(self.offsets[i])).abs(), self.weights[i]))
            .collect();
        let linf = diff.iter().map(|d| d.0).fold(0.0, f64::max);
        let l2 = diff.iter().map(|(d, w)| w * d * d).sum::<f64>().sqrt();
        let selected = match norm {
            NormMode::LinftyMargin => linf,
            NormMode::L2Margin => l2,
            NormMode::Lbeta { p } => {
                let beta = 2.0 / (p - 1.0);
                diff.iter().map(|(d, w)| w * d.powf(beta)).sum::<f64>().powf(1.0 / beta)
            }
        };
        let e = GammaError { linf, l2, selected };
        self.error = Some(e);
        e
    }

    /// CSV with columns `s,gamma_hat,masked`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "gamma_hat", "masked"])?;
        for i in 0..self.values.len() {
            wr.write_record([
                fmt(self.params[i]),
                fmt(self.values[i]),
                u8::from(self.mask[i]).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Indices of the samples lying in the closed margin set.
pub(crate) fn margin_indices(result: &ContinuationResult, set: &ArcSet, domain: &Domain) -> Vec<usize> {
    let tol = 1e-9 * domain.length();
    (0..result.sampling.len())
        .filter(|&i| set.contains_closed(result.sampling.params[i], tol))
        .collect()
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quotient reconstruction `γ̂ = −∂u/∂ν / u` on Γ_I^ρ, with a denominator
/// floor and projection onto `[0, γ0]`.
pub fn recover_gamma(domain: &Domain, result: &ContinuationResult, cfg: &RecoveryConfig) -> Result<GammaEstimate> {
    cfg.validate()?;
    if result.sampling.side != Side::I {
        return Err(Error::InvalidInput("continuation result is not sampled on Γ_I".into()));
    }
    let rho = cfg.margin.unwrap_or(domain.r0());
    let set = domain.interior_margin_subset(Side::I, rho)?;
    let idx = margin_indices(result, &set, domain);
    if idx.is_empty() {
        return Err(Error::Degenerate(format!("no Γ_I samples at distance ≥ {rho} from Γ_A")));
    }
    let offsets = result.sampling.offsets(domain);
    let abs_trace: Vec<f64> = idx.iter().map(|&i| result.trace[i].abs()).collect();
    let floor = match cfg.floor {
        FloorMode::Absolute { tau } => tau,
        FloorMode::Quantile { q } => {
            let mut s = abs_trace.clone();
            s.sort_by(f64::total_cmp);
            quantile(&s, q)
        }
        FloorMode::None => 0.0,
    };
    let mask: Vec<bool> = abs_trace.iter().map(|&a| a < floor || a == 0.0).collect();
    let masked = mask.iter().filter(|m| **m).count();
    if 2 * masked > idx.len() {
        return Err(Error::RecoveryDegenerate {
            masked,
            total: idx.len(),
            mask,
        });
    }
    let upper = cfg.gamma0.unwrap_or(f64::INFINITY);
    let mut values = Vec::with_capacity(idx.len());
    let mut clamp_events = Vec::new();
    for (k, &i) in idx.iter().enumerate() {
        if mask[k] {
            values.push(0.0);
            continue;
        }
        let raw = -result.flux[i] / result.trace[i];
        let clamped = raw.clamp(0.0, upper) + 0.0;
        if clamped != raw {
            clamp_events.push(ClampEvent {
                param: result.sampling.params[i],
                raw,
                clamped,
            });
        }
        values.push(clamped);
    }
    if !clamp_events.is_empty() {
        log::info!("γ̂ clamped to [0, {upper}] at {} of {} samples", clamp_events.len(), idx.len());
    }
    Ok(GammaEstimate {
        params: idx.iter().map(|&i| result.sampling.params[i]).collect(),
        offsets: idx.iter().map(|&i| offsets[i]).collect(),
        weights: idx.iter().map(|&i| result.sampling.weights[i]).collect(),
        values,
        mask,
        floor,
        clamp_events,
        error: None,
    })
}
