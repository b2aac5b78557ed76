use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::continuation::ContinuationResult;
use crate::error::{Error, Result};
use crate::estimates::{
    admissible_window, calibrate_local_cauchy, calibration_suite, doubling_profile, harmonic_suite,
    muckenhoupt_profile, probe_points, radius_grid, rellich_calibration, vanishing_rate_fit, CauchyCalibration,
    DoublingProfile, MuckenhouptProfile, RellichCalibration, VanishingModel, VanishingRateFit,
};
use crate::forward::fmt;
use crate::geometry::Vec2;
use crate::recovery::GammaEstimate;

use super::config::{AprioriData, ExperimentConfig, Problem};
use super::modulus::ModulusModel;
use super::sweep::{draw_rng, run_draw, run_stability_sweep_on, ContinuedDraw, SweepReport};

/// Profiles of the forward field around one probe center.
#[derive(Debug, Clone)]
pub struct CenterProfiles {
    pub center: Vec2,
    pub window: (f64, f64),
    pub doubling: Option<DoublingProfile>,
    pub vanishing: Option<VanishingRateFit>,
    pub muckenhoupt: Option<MuckenhouptProfile>,
}

/// Estimate constants of the forward field and the calibration suites.
#[derive(Debug, Clone, Default)]
pub struct EstimateSummary {
    pub centers: Vec<CenterProfiles>,
    pub rellich: Option<RellichCalibration>,
    pub cauchy: Option<CauchyCalibration>,
    /// Stages that could not be evaluated, with the reason.
    pub failures: Vec<String>,
}

impl EstimateSummary {
    pub fn k1_hat(&self) -> Option<f64> {
        self.centers
            .iter()
            .filter_map(|c| c.doubling.as_ref().map(|d| d.k1_hat))
            .reduce(f64::max)
    }

    pub fn a_hat(&self) -> Option<f64> {
        self.centers
            .iter()
            .filter_map(|c| c.muckenhoupt.as_ref().filter(|m| !m.divergent).map(|m| m.a_hat))
            .reduce(f64::max)
    }

    /// Largest fitted polynomial vanishing exponent.
    pub fn k_poly(&self) -> Option<f64> {
        self.centers
            .iter()
            .filter_map(|c| c.vanishing.as_ref().map(|v| v.polynomial.exponent))
            .reduce(f64::max)
    }
}

/// Runs every estimate profile configured by `cfg.estimates` on the
/// forward field. Failures of single stages are collected, not raised.
pub fn profile_estimates(problem: &Problem, cfg: &ExperimentConfig) -> EstimateSummary {
    let w = &cfg.estimates;
    let field = &problem.field;
    let domain = &problem.domain;
    let mut out = EstimateSummary::default();
    let mut cauchy_radii: Option<(f64, f64)> = None;
    let centers = probe_points(domain, w.centers);
    for (k, x0) in centers.iter().enumerate() {
        let window = admissible_window(field, domain, x0, w.r_bar);
        let mut note = |stage: &str, e: Error| out.failures.push(format!("{stage} at center {k}: {e}"));
        let radii = radius_grid(window.0, window.1, w.n_radii);
        let doubling = doubling_profile(field, domain, x0, window.0, 0.5 * window.1, w.n_radii)
            .map_err(|e| note("doubling", e))
            .ok();
        let (vanishing, muckenhoupt) = match radii {
            Ok(radii) => (
                vanishing_rate_fit(field, domain, x0, &radii).map_err(|e| note("vanishing rate", e)).ok(),
                muckenhoupt_profile(field, domain, x0, w.p, &radii).map_err(|e| note("muckenhoupt", e)).ok(),
            ),
            Err(e) => {
                note("radius window", e);
                (None, None)
            }
        };
        if window.1 >= window.0 {
            cauchy_radii = Some(cauchy_radii.map_or(window, |(lo, hi)| (lo.max(window.0), hi.min(window.1))));
        }
        out.centers.push(CenterProfiles {
            center: *x0,
            window,
            doubling,
            vanishing,
            muckenhoupt,
        });
    }
    let center = domain.centroid();
    let scale = domain
        .curve
        .sample(64)
        .iter()
        .map(|(_, p)| (p - center).norm())
        .fold(0.0, f64::max);
    match rellich_calibration(&problem.mesh, &harmonic_suite(center, scale)) {
        Ok(r) => out.rellich = Some(r),
        Err(e) => out.failures.push(format!("rellich calibration: {e}")),
    }
    let cauchy = match cauchy_radii.filter(|(lo, hi)| hi >= lo) {
        None => Err(Error::Degenerate("no common radius window over the probe centers".into())),
        Some((lo, hi)) => radius_grid(lo.max(0.5 * hi), hi, 3).and_then(|radii| {
            let fields = calibration_suite(&problem.mesh, domain)?;
            calibrate_local_cauchy(domain, &fields, &centers, &radii)
        }),
    };
    match cauchy {
        Ok(c) => out.cauchy = Some(c),
        Err(e) => out.failures.push(format!("local cauchy calibration: {e}")),
    }
    out
}

/// Named pass/fail entry of the summary.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Whatever stages of one experiment have been completed.
#[derive(Debug, Clone, Copy)]
pub struct Artifacts<'a> {
    pub config: &'a ExperimentConfig,
    pub problem: Option<&'a Problem>,
    pub continuation: Option<&'a ContinuationResult>,
    pub gamma: Option<&'a GammaEstimate>,
    pub estimates: Option<&'a EstimateSummary>,
    pub sweep: Option<&'a SweepReport>,
    pub checks: &'a [Check],
}

impl<'a> Artifacts<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Self {
        Artifacts {
            config,
            problem: None,
            continuation: None,
            gamma: None,
            estimates: None,
            sweep: None,
            checks: &[],
        }
    }
}

/// Checks that follow from the artifacts themselves.
pub fn standard_checks(a: &Artifacts) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(s) = a.sweep {
        out.push(Check::new(
            "sweep_monotone",
            s.is_monotone(),
            format!("medians {:?}", s.medians().iter().map(|m| fmt(m.1)).collect::<Vec<_>>()),
        ));
        out.push(Check::new("sweep_completed", s.aborted.is_none(), s.aborted.clone().unwrap_or_default()));
        out.push(Check::new(
            "modulus_table",
            s.fits.is_some(),
            s.fits.as_ref().map_or("no fit".to_string(), |t| {
                t.winner.map_or("no winner within the margin".into(), |m| format!("winner {}", m.name()))
            }),
        ));
        if let Some(ok) = s.clean_within_floor() {
            out.push(Check::new("clean_within_floor", ok, ""));
        }
    }
    if let Some(e) = a.estimates {
        if let Some(r) = &e.rellich {
            out.push(Check::new("rellich_suite_holds", r.all_hold(), format!("C = {}", fmt(r.fitted_c))));
        }
        if let Some(c) = &e.cauchy {
            out.push(Check::new(
                "local_cauchy_calibrated",
                c.c.is_finite() && c.c > 0.0,
                format!("delta = {}, C = {}", fmt(c.delta), fmt(c.c)),
            ));
        }
    }
    out
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(f))
}

#[derive(Serialize)]
struct FitEntry {
    model: &'static str,
    c: f64,
    exponent: f64,
    residual: f64,
    admissible: bool,
}

#[derive(Serialize)]
struct LevelEntry {
    eps: f64,
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_l2: Option<f64>,
}

#[derive(Serialize)]
struct SweepEntry {
    domain: String,
    regularity: String,
    monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    clean_within_floor: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fe_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    winner: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aborted: Option<String>,
    warnings: Vec<String>,
    levels: Vec<LevelEntry>,
    fits: Vec<FitEntry>,
}

#[derive(Serialize)]
struct EstimateEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    k1_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_poly: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rellich_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cauchy_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cauchy_c: Option<f64>,
    vanishing_models: Vec<String>,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct RunEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    masked: Option<usize>,
}

#[derive(Serialize)]
struct Summary {
    seed: u64,
    h: f64,
    degree: usize,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    apriori: Option<AprioriData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RunEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimates: Option<EstimateEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepEntry>,
    checks: Vec<Check>,
}

/// Writes every available artifact into `dir` as CSV, plus `config.toml`
/// and a `summary.toml` with the a priori data, fitted constants and the
/// pass/fail of every check. Returns the written paths.
pub fn emit_report(dir: &Path, a: &Artifacts) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    create(dir, "config.toml", &mut written)?.write_all(a.config.to_toml()?.as_bytes())?;
    if let Some(p) = a.problem {
        p.field.write_nodes_csv(create(dir, "forward_nodes.csv", &mut written)?)?;
        p.field.write_boundary_csv(create(dir, "forward_boundary.csv", &mut written)?)?;
        p.data.write_csv(create(dir, "cauchy_data.csv", &mut written)?)?;
    }
    if let Some(c) = a.continuation {
        c.write_csv(create(dir, "continuation.csv", &mut written)?)?;
    }
    if let Some(g) = a.gamma {
        g.write_csv(create(dir, "gamma.csv", &mut written)?)?;
    }
    if let Some(e) = a.estimates {
        for (k, c) in e.centers.iter().enumerate() {
            if let Some(d) = &c.doubling {
                d.write_csv(create(dir, &format!("doubling_{k}.csv"), &mut written)?)?;
            }
            if let Some(v) = &c.vanishing {
                v.write_csv(create(dir, &format!("vanishing_{k}.csv"), &mut written)?)?;
            }
            if let Some(m) = &c.muckenhoupt {
                m.write_csv(create(dir, &format!("muckenhoupt_{k}.csv"), &mut written)?)?;
            }
        }
        if let Some(r) = &e.rellich {
            let mut wr = csv::Writer::from_writer(create(dir, "rellich.csv", &mut written)?);
            wr.write_record(["member", "normal_sq", "tangential_sq", "h1_sq", "normal_ratio", "tangential_ratio"])?;
            for (name, rep) in r.names.iter().zip(&r.reports) {
                wr.write_record([
                    name.clone(),
                    fmt(rep.normal_sq),
                    fmt(rep.tangential_sq),
                    fmt(rep.h1_sq),
                    fmt(rep.normal_ratio),
                    fmt(rep.tangential_ratio),
                ])?;
            }
            wr.flush()?;
        }
        if let Some(c) = &e.cauchy {
            let mut wr = csv::Writer::from_writer(create(dir, "cauchy_calibration.csv", &mut written)?);
            wr.write_record(["surface", "solid"])?;
            for (s, b) in &c.samples {
                wr.write_record([fmt(*s), fmt(*b)])?;
            }
            wr.flush()?;
        }
    }
    if let Some(s) = a.sweep {
        s.write_draws_csv(create(dir, "sweep_draws.csv", &mut written)?)?;
        s.write_levels_csv(create(dir, "sweep_levels.csv", &mut written)?)?;
        if let Some(t) = &s.fits {
            t.write_csv(create(dir, "modulus.csv", &mut written)?)?;
        }
    }
    let mut checks = a.checks.to_vec();
    checks.extend(standard_checks(a));
    let summary = Summary {
        seed: a.config.seed,
        h: a.config.h,
        degree: a.config.degree,
        files: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        apriori: a.problem.map(|p| p.apriori),
        run: (a.continuation.is_some() || a.gamma.is_some()).then(|| RunEntry {
            lambda: a.continuation.map(|c| c.lambda),
            discrepancy: a.continuation.map(|c| c.discrepancy),
            gamma_linf: a.gamma.and_then(|g| g.error.map(|e| e.linf)),
            gamma_l2: a.gamma.and_then(|g| g.error.map(|e| e.l2)),
            masked: a.gamma.map(GammaEstimate::masked_count),
        }),
        estimates: a.estimates.map(|e| EstimateEntry {
            k1_hat: e.k1_hat(),
            k_poly: e.k_poly(),
            a_hat: e.a_hat(),
            rellich_c: e.rellich.as_ref().map(|r| r.fitted_c),
            cauchy_delta: e.cauchy.as_ref().map(|c| c.delta),
            cauchy_c: e.cauchy.as_ref().map(|c| c.c),
            vanishing_models: e
                .centers
                .iter()
                .filter_map(|c| c.vanishing.as_ref())
                .map(|v| match v.model {
                    VanishingModel::Polynomial => "polynomial".to_string(),
                    VanishingModel::Exponential => "exponential".to_string(),
                })
                .collect(),
            failures: e.failures.clone(),
        }),
        sweep: a.sweep.map(|s| SweepEntry {
            domain: s.domain.clone(),
            regularity: s.regularity.clone(),
            monotone: s.is_monotone(),
            clean_within_floor: s.clean_within_floor(),
            fe_floor: s.fe_floor,
            winner: s.fits.as_ref().and_then(|t| t.winner).map(ModulusModel::name),
            aborted: s.aborted.clone(),
            warnings: s
                .warnings
                .iter()
                .chain(s.fits.iter().flat_map(|t| t.warnings.iter()))
                .cloned()
                .collect(),
            levels: s
                .levels
                .iter()
                .chain(&s.clean)
                .map(|l| LevelEntry {
                    eps: l.eps,
                    failures: l.failures,
                    median_linf: l.median_linf,
                    median_l2: l.median_l2,
                })
                .collect(),
            fits: s
                .fits
                .iter()
                .flat_map(|t| t.fits.iter())
                .map(|f| FitEntry {
                    model: f.model.name(),
                    c: f.c,
                    exponent: f.exponent,
                    residual: f.residual,
                    admissible: f.admissible,
                })
                .collect(),
        }),
        checks,
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    let path = dir.join("summary.toml");
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Every stage of one experiment: the problem, one draw at the first
/// noise level, the estimate profiles and the full sweep.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub problem: Problem,
    pub draw: Option<ContinuedDraw>,
    pub estimates: EstimateSummary,
    pub sweep: SweepReport,
}

impl Pipeline {
    pub fn run(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = Problem::build(cfg)?;
        let draw = cfg
            .eps
            .first()
            .map(|&eps| run_draw(&problem, cfg, eps, &mut draw_rng(cfg.seed, 0, 0)))
            .transpose()
            .unwrap_or_else(|e| {
                log::warn!("single draw failed: {e}");
                None
            });
        let estimates = profile_estimates(&problem, cfg);
        let sweep = run_stability_sweep_on(&problem, cfg)?;
        Ok(Pipeline {
            problem,
            draw,
            estimates,
            sweep,
        })
    }

    pub fn artifacts<'a>(&'a self, cfg: &'a ExperimentConfig, checks: &'a [Check]) -> Artifacts<'a> {
        Artifacts {
            config: cfg,
            problem: Some(&self.problem),
            continuation: self.draw.as_ref().map(|d| &d.continuation),
            gamma: self.draw.as_ref().map(|d| &d.gamma),
            estimates: Some(&self.estimates),
            sweep: Some(&self.sweep),
            checks,
        }
    }
}
