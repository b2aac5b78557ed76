use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use robin_lab::continuation::Regularization;
use robin_lab::experiment::{
    draw_rng, emit_report, fit_modulus, profile_estimates, run_draw, run_stability_sweep_on, Artifacts,
    ExperimentConfig, Pipeline, Problem,
};

/// Robin coefficient recovery experiments from boundary measurements.
#[derive(Parser)]
#[command(name = "robin-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Overrides the mesh size of the config.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Args, Clone)]
struct DrawArgs {
    /// Noise level; defaults to the first level of the config.
    #[arg(long)]
    eps: Option<f64>,
    /// Index of the noise draw.
    #[arg(long, default_value_t = 0)]
    draw: usize,
    /// Overrides the basis degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Fixed Tikhonov weight instead of the discrepancy principle.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with the true coefficient.
    Solve(Common),
    /// Noisy Cauchy data and their continuation onto the inaccessible part.
    Continue {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        draw: DrawArgs,
    },
    /// Continuation followed by coefficient recovery.
    Recover {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        draw: DrawArgs,
    },
    /// Doubling, vanishing, Muckenhoupt, Rellich and local Cauchy profiles.
    Profile(Common),
    /// Stability sweep over the noise grid with modulus fits.
    Sweep(Common),
    /// Fits the modulus models to an `(eps, error)` CSV.
    Fit {
        /// CSV with an `eps` column and an `error` or `median_linf` column.
        input: PathBuf,
        /// Output CSV; standard output when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Every stage and the full report bundle.
    Report(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(h) = common.h {
        cfg.h = h;
    }
    cfg.validate()?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    Ok((cfg, out))
}

fn apply(cfg: &mut ExperimentConfig, d: &DrawArgs) -> f64 {
    if let Some(n) = d.degree {
        cfg.degree = n;
    }
    if let Some(lambda) = d.lambda {
        cfg.regularization = Regularization::Fixed { lambda };
    }
    d.eps.unwrap_or_else(|| cfg.eps.first().copied().unwrap_or(0.0))
}

fn build(cfg: &ExperimentConfig) -> Result<Problem> {
    let t = Instant::now();
    let p = Problem::build(cfg)?;
    info!(
        "{}: {} nodes, {} triangles, forward solve in {:.2?}",
        p.domain.name,
        p.mesh.n_nodes(),
        p.mesh.triangles.len(),
        t.elapsed()
    );
    Ok(p)
}

fn written(out: &Path, files: &[PathBuf]) {
    println!("wrote {} files to {}", files.len(), out.display());
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let e = col("eps").context("no eps column")?;
    let v = col("error").or_else(|| col("median_linf")).context("no error or median_linf column")?;
    let mut pairs = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let (Some(a), Some(b)) = (rec.get(e), rec.get(v)) else { continue };
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let eps: f64 = a.parse()?;
        if eps > 0.0 {
            pairs.push((eps, b.parse()?));
        }
    }
    Ok(pairs)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Solve(common) => {
            let (cfg, out) = load(&common)?;
            let p = build(&cfg)?;
            let files = emit_report(&out, &Artifacts { problem: Some(&p), ..Artifacts::new(&cfg) })?;
            written(&out, &files);
        }
        Command::Continue { common, draw } => {
            let (mut cfg, out) = load(&common)?;
            let eps = apply(&mut cfg, &draw);
            let p = build(&cfg)?;
            let d = run_draw(&p, &cfg, eps, &mut draw_rng(cfg.seed, 0, draw.draw))?;
            println!(
                "λ = {:.3e}, misfit {:.3e}, floor {:.3e}",
                d.continuation.lambda, d.continuation.discrepancy, d.continuation.floor
            );
            let a = Artifacts {
                problem: Some(&p),
                continuation: Some(&d.continuation),
                ..Artifacts::new(&cfg)
            };
            written(&out, &emit_report(&out, &a)?);
        }
        Command::Recover { common, draw } => {
            let (mut cfg, out) = load(&common)?;
            let eps = apply(&mut cfg, &draw);
            let p = build(&cfg)?;
            let d = run_draw(&p, &cfg, eps, &mut draw_rng(cfg.seed, 0, draw.draw))?;
            if let Some(e) = d.gamma.error {
                println!("γ error: L∞ {:.4e}, L² {:.4e} ({} masked)", e.linf, e.l2, d.gamma.masked_count());
            }
            let a = Artifacts {
                problem: Some(&p),
                continuation: Some(&d.continuation),
                gamma: Some(&d.gamma),
                ..Artifacts::new(&cfg)
            };
            written(&out, &emit_report(&out, &a)?);
        }
        Command::Profile(common) => {
            let (cfg, out) = load(&common)?;
            let p = build(&cfg)?;
            let e = profile_estimates(&p, &cfg);
            for f in &e.failures {
                log::warn!("{f}");
            }
            let a = Artifacts {
                problem: Some(&p),
                estimates: Some(&e),
                ..Artifacts::new(&cfg)
            };
            written(&out, &emit_report(&out, &a)?);
        }
        Command::Sweep(common) => {
            let (cfg, out) = load(&common)?;
            let p = build(&cfg)?;
            let t = Instant::now();
            let s = run_stability_sweep_on(&p, &cfg)?;
            info!("sweep finished in {:.2?}", t.elapsed());
            for (eps, m) in s.medians() {
                println!("ε = {eps:.0e}: median L∞ error {m:.4e}");
            }
            println!("monotone: {}", s.is_monotone());
            let a = Artifacts {
                problem: Some(&p),
                sweep: Some(&s),
                ..Artifacts::new(&cfg)
            };
            written(&out, &emit_report(&out, &a)?);
        }
        Command::Fit { input, out } => {
            let pairs = read_pairs(&input)?;
            if pairs.is_empty() {
                bail!("no (eps, error) rows in {}", input.display());
            }
            let table = fit_modulus(&pairs)?;
            for w in &table.warnings {
                log::warn!("{w}");
            }
            match out {
                Some(path) => table.write_csv(std::fs::File::create(&path)?)?,
                None => table.write_csv(std::io::stdout().lock())?,
            }
        }
        Command::Report(common) => {
            let (cfg, out) = load(&common)?;
            let t = Instant::now();
            let run = Pipeline::run(&cfg)?;
            info!("pipeline finished in {:.2?}", t.elapsed());
            let files = emit_report(&out, &run.artifacts(&cfg, &[]))?;
            written(&out, &files);
        }
    }
    Ok(())
}
