use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuation::{continue_cauchy, ContinuationResult};
use crate::error::Result;
use crate::forward::fmt;
use crate::recovery::recover_gamma;
use crate::stats::median;

use super::config::{ExperimentConfig, Problem};
use super::modulus::{fit_modulus, ModulusTable};

/// Share of failed draws at one level that aborts the sweep.
pub const ABORT_FRACTION: f64 = 0.5;
/// Tolerance of the monotonicity check, relative to the larger median.
pub const MONOTONE_TOLERANCE: f64 = 0.1;

/// Outcome of one noisy draw.
#[derive(Debug, Clone, Serialize)]
pub struct DrawOutcome {
    pub draw: usize,
    pub linf: Option<f64>,
    pub l2: Option<f64>,
    pub lambda: Option<f64>,
    pub masked: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub eps: f64,
    pub draws: Vec<DrawOutcome>,
    pub failures: usize,
    pub median_linf: Option<f64>,
    pub median_l2: Option<f64>,
    pub median_lambda: Option<f64>,
}

impl LevelSummary {
    fn new(eps: f64, draws: Vec<DrawOutcome>) -> Self {
        let pick = |f: fn(&DrawOutcome) -> Option<f64>| -> Vec<f64> { draws.iter().filter_map(f).collect() };
        LevelSummary {
            eps,
            failures: draws.iter().filter(|d| d.failure.is_some()).count(),
            median_linf: median(&pick(|d| d.linf)),
            median_l2: median(&pick(|d| d.l2)),
            median_lambda: median(&pick(|d| d.lambda)),
            draws,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub domain: String,
    pub regularity: String,
    pub h: f64,
    pub degree: usize,
    pub seed: u64,
    pub levels: Vec<LevelSummary>,
    /// The noiseless run, when the grid ends with 0.
    pub clean: Option<LevelSummary>,
    /// Recovery error from the exact finite element traces on Γ_I.
    pub fe_floor: Option<f64>,
    /// Fits of the per-level `L^∞` medians.
    pub fits: Option<ModulusTable>,
    pub aborted: Option<String>,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn medians(&self) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .filter_map(|l| l.median_linf.map(|m| (l.eps, m)))
            .collect()
    }

    /// Medians nonincreasing as ε decreases, up to [`MONOTONE_TOLERANCE`].
    pub fn is_monotone(&self) -> bool {
        is_monotone(&self.medians())
    }

    /// Whether the clean run stays within the discretization plateau
    /// reached at the smallest ε.
    pub fn clean_within_floor(&self) -> Option<bool> {
        let clean = self.clean.as_ref()?.median_linf?;
        let fe = self.fe_floor.unwrap_or(0.0);
        let plateau = self.medians().last().map_or(fe, |m| m.1).max(fe);
        Some(clean <= plateau * (1.0 + MONOTONE_TOLERANCE))
    }

    /// CSV with one row per draw: `eps,draw,status,linf,l2,lambda,masked`.
    pub fn write_draws_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps", "draw", "status", "linf", "l2", "lambda", "masked"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
        for level in self.levels.iter().chain(&self.clean) {
            for d in &level.draws {
                wr.write_record([
                    fmt(level.eps),
                    d.draw.to_string(),
                    d.failure.as_ref().map_or("ok".to_string(), |f| format!("failed: {f}")),
                    opt(d.linf),
                    opt(d.l2),
                    opt(d.lambda),
                    d.masked.map_or(String::new(), |m| m.to_string()),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// CSV with one row per level: `eps,draws,failures,median_linf,median_l2,median_lambda`.
    pub fn write_levels_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps", "draws", "failures", "median_linf", "median_l2", "median_lambda"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
        for level in self.levels.iter().chain(&self.clean) {
            wr.write_record([
                fmt(level.eps),
                level.draws.len().to_string(),
                level.failures.to_string(),
                opt(level.median_linf),
                opt(level.median_l2),
                opt(level.median_lambda),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `true` when `e(ε_j) ≤ e(ε_i) + 10% · max` for every `ε_j < ε_i`;
/// pairs are ordered by decreasing ε.
pub fn is_monotone(pairs: &[(f64, f64)]) -> bool {
    pairs.iter().enumerate().all(|(i, a)| {
        pairs[i + 1..]
            .iter()
            .all(|b| b.1 <= a.1 + MONOTONE_TOLERANCE * a.1.max(b.1))
    })
}

/// Deterministic generator for draw `draw` at level `level`.
pub fn draw_rng(seed: u64, level: usize, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | draw as u64);
    rng
}

/// Noise, continuation and recovery for one draw.
pub fn run_draw(problem: &Problem, cfg: &ExperimentConfig, eps: f64, rng: &mut ChaCha8Rng) -> Result<ContinuedDraw> {
    let data = problem.data.with_noise(eps, rng)?;
    let continuation = continue_cauchy(&problem.domain, &data, cfg.degree, cfg.regularization, &problem.target)?;
    let rc = problem.recovery_config(cfg);
    let mut gamma = recover_gamma(&problem.domain, &continuation, &rc)?;
    gamma.compare(&problem.gamma, rc.norm);
    Ok(ContinuedDraw { continuation, gamma })
}

/// Intermediate products of one draw.
#[derive(Debug, Clone)]
pub struct ContinuedDraw {
    pub continuation: ContinuationResult,
    pub gamma: crate::recovery::GammaEstimate,
}

fn outcome(draw: usize, r: Result<ContinuedDraw>) -> DrawOutcome {
    match r {
        Ok(d) => {
            let e = d.gamma.error.expect("compared");
            DrawOutcome {
                draw,
                linf: Some(e.linf),
                l2: Some(e.l2),
                lambda: Some(d.continuation.lambda),
                masked: Some(d.gamma.masked_count()),
                failure: None,
            }
        }
        Err(e) => DrawOutcome {
            draw,
            linf: None,
            l2: None,
            lambda: None,
            masked: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Runs every (ε, draw) point of the config on a prepared problem.
pub fn run_stability_sweep_on(problem: &Problem, cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let rc = problem.recovery_config(cfg);
    let mut warnings = Vec::new();
    let exact = ContinuationResult::from_field(&problem.field, &problem.domain);
    let fe_floor = match recover_gamma(&problem.domain, &exact, &rc) {
        Ok(mut fe) => Some(fe.compare(&problem.gamma, rc.norm).linf),
        Err(e) => {
            warnings.push(format!("recovery from the exact traces failed: {e}"));
            None
        }
    };
    let mut levels = Vec::new();
    let mut clean = None;
    let mut aborted = None;
    for (li, &eps) in cfg.eps.iter().enumerate() {
        let n = if eps == 0.0 { 1 } else { cfg.draws };
        let draws: Vec<DrawOutcome> = (0..n)
            .into_par_iter()
            .map(|d| {
                let mut rng = draw_rng(cfg.seed, li, d);
                outcome(d, run_draw(problem, cfg, eps, &mut rng))
            })
            .collect();
        let summary = LevelSummary::new(eps, draws);
        let failed = summary.failures as f64 > ABORT_FRACTION * n as f64;
        if eps == 0.0 {
            clean = Some(summary);
        } else {
            levels.push(summary);
        }
        if failed {
            let msg = format!("more than half of the draws failed at ε = {eps:e}");
            log::warn!("{msg}; sweep aborted");
            aborted = Some(msg);
            break;
        }
    }
    let pairs: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|l| l.median_linf.filter(|m| *m > 0.0).map(|m| (l.eps, m)))
        .collect();
    let fits = if pairs.len() >= 4 {
        match fit_modulus(&pairs) {
            Ok(t) => Some(t),
            Err(e) => {
                warnings.push(format!("modulus fit failed: {e}"));
                None
            }
        }
    } else {
        warnings.push(format!("only {} levels with a median; no modulus fit", pairs.len()));
        None
    };
    if cfg.decades() < super::modulus::MIN_DECADES {
        warnings.push(format!("ε grid spans {:.2} decades; fits have low power", cfg.decades()));
    }
    Ok(SweepReport {
        domain: problem.domain.name.clone(),
        regularity: problem.domain.curve.regularity().to_string(),
        h: cfg.h,
        degree: cfg.degree,
        seed: cfg.seed,
        levels,
        clean,
        fe_floor,
        fits,
        aborted,
        warnings,
    })
}

/// Builds the problem from the config and runs the sweep.
pub fn run_stability_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let problem = Problem::build(cfg)?;
    run_stability_sweep_on(&problem, cfg)
}
