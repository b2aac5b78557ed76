use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::fmt;
use crate::stats::line_fit;

/// Relative residual margin a model needs over the runner-up to be declared
/// the winner.
pub const WINNER_MARGIN: f64 = 0.1;
/// Fewer decades of ε than this trigger a low-power warning.
pub const MIN_DECADES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusModel {
    /// `C |log ε|^{−ϑ}`.
    SingleLog,
    /// `C |log |log ε||^{−ϑ}`.
    DoubleLog,
    /// `C ε^θ`.
    Power,
}

impl ModulusModel {
    pub const ALL: [ModulusModel; 3] = [ModulusModel::SingleLog, ModulusModel::DoubleLog, ModulusModel::Power];

    pub fn name(self) -> &'static str {
        match self {
            ModulusModel::SingleLog => "single_log",
            ModulusModel::DoubleLog => "double_log",
            ModulusModel::Power => "power",
        }
    }

    /// Regression abscissa: the model is `ln error = ln C + slope · x`.
    fn abscissa(self, eps: f64) -> f64 {
        match self {
            ModulusModel::SingleLog => eps.ln().abs().ln(),
            ModulusModel::DoubleLog => eps.ln().abs().ln().abs().ln(),
            ModulusModel::Power => eps.ln(),
        }
    }

    /// Exponent as reported: `ϑ = −slope` for the log models, `θ = slope`.
    fn exponent(self, slope: f64) -> f64 {
        match self {
            ModulusModel::Power => slope,
            _ => -slope,
        }
    }

    pub fn eval(self, c: f64, exponent: f64, eps: f64) -> f64 {
        match self {
            ModulusModel::Power => c * eps.powf(exponent),
            _ => c * (-exponent * self.abscissa(eps)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusFit {
    pub model: ModulusModel,
    pub c: f64,
    /// `ϑ` for the log models, `θ` for the power model.
    pub exponent: f64,
    /// Sum of squared residuals of `ln error`.
    pub residual: f64,
    /// Whether `C > 0` and the exponent is positive.
    pub admissible: bool,
}

/// All three fits on the same data, with the winner when it is clear.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusTable {
    pub fits: [ModulusFit; 3],
    pub winner: Option<ModulusModel>,
    pub warnings: Vec<String>,
}

impl ModulusTable {
    pub fn fit(&self, model: ModulusModel) -> &ModulusFit {
        self.fits.iter().find(|f| f.model == model).expect("every model is fitted")
    }

    /// CSV with columns `model,C,exponent,residual,admissible,winner`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["model", "C", "exponent", "residual", "admissible", "winner"])?;
        for f in &self.fits {
            wr.write_record([
                f.model.name().to_string(),
                fmt(f.c),
                fmt(f.exponent),
                fmt(f.residual),
                f.admissible.to_string(),
                (self.winner == Some(f.model)).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Least-squares fits of the three modulus families to `(ε, error)` pairs.
pub fn fit_modulus(pairs: &[(f64, f64)]) -> Result<ModulusTable> {
    if pairs.len() < 4 {
        return Err(Error::InvalidInput(format!("modulus fit needs at least 4 pairs, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.0 > 0.0 && p.0 < 1.0)) {
        return Err(Error::InvalidInput(format!("ε = {} is outside (0, 1)", p.0)));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::InvalidInput(format!("error {} at ε = {} must be positive", p.1, p.0)));
    }
    let y: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mut fits = Vec::with_capacity(3);
    for model in ModulusModel::ALL {
        let x: Vec<f64> = pairs.iter().map(|p| model.abscissa(p.0)).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "{} abscissa is singular on these ε (|log ε| = 1)",
                model.name()
            )));
        }
        let f = line_fit(&x, &y).ok_or_else(|| Error::Degenerate("ε values are not distinct".into()))?;
        let c = f.intercept.exp();
        let exponent = model.exponent(f.slope);
        fits.push(ModulusFit {
            model,
            c,
            exponent,
            residual: f.residual,
            admissible: c > 0.0 && exponent > 0.0,
        });
    }
    let fits: [ModulusFit; 3] = fits.try_into().expect("three models");
    let mut order: Vec<&ModulusFit> = fits.iter().collect();
    order.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    let winner = (order[0].residual < (1.0 - WINNER_MARGIN) * order[1].residual).then_some(order[0].model);
    let mut warnings = Vec::new();
    let (lo, hi) = pairs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let decades = (hi / lo).log10();
    if decades < MIN_DECADES {
        warnings.push(format!(
            "ε spans {decades:.2} decades (< {MIN_DECADES}); the model comparison has low power"
        ));
    }
    Ok(ModulusTable { fits, winner, warnings })
}
