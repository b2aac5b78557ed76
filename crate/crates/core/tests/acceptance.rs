use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robin_lab::continuation::{continue_cauchy, ArcSampling, CauchyData, ContinuationResult, Regularization};
use robin_lab::estimates::{
    admissible_window, doubling_profile, harmonic_suite, muckenhoupt_profile, rellich_calibration, vanishing_rate_fit,
};
use robin_lab::experiment::{emit_report, run_stability_sweep, ExperimentConfig, Pipeline};
use robin_lab::forward::{solve_forward, solve_forward_on, DiscreteField, FluxPiece, NeumannFlux, RobinCoefficient};
use robin_lab::geometry::{Domain, DomainFile, Side, Vec2};
use robin_lab::mesh::{MeshKind, TriMesh};
use robin_lab::quadrature::GAUSS3;
use robin_lab::recovery::{recover_gamma, weighted_interpolation_bound, weighted_tradeoff, NormMode, RecoveryConfig};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn domain(name: &str) -> Domain {
    DomainFile::load(&configs().join("domains").join(name))
        .and_then(|f| f.build())
        .unwrap_or_else(|e| panic!("domain {name}: {e}"))
}

fn mesh(d: &Domain, h: f64) -> Arc<TriMesh> {
    Arc::new(TriMesh::generate(d, h, MeshKind::Auto).expect("mesh"))
}

const HS: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

fn top_flux() -> NeumannFlux {
    NeumannFlux::constant_on(2.0, 3.0, 1.0)
}

fn half() -> RobinCoefficient {
    RobinCoefficient::constant(0.5, 0.5)
}

fn forward_accuracy() -> Outcome {
    let d = domain("square.toml");
    let mut ok = true;
    let mut parts = Vec::new();
    for h in HS {
        let t = Instant::now();
        let u = solve_forward(&d, &top_flux(), &half(), h)?;
        let secs = t.elapsed().as_secs_f64();
        let err = u
            .mesh
            .nodes
            .iter()
            .zip(&u.values)
            .map(|(p, v)| (v - (p.y + 2.0)).abs())
            .fold(0.0, f64::max);
        ok &= err <= 5.0 * h * h && secs < 10.0;
        parts.push(format!("h=1/{:.0}: err {err:.2e} (≤ {:.2e}), {secs:.2}s", 1.0 / h, 5.0 * h * h));
    }
    Ok((ok, parts.join("; ")))
}

/// `(∫|∇u|² + ∫γu² − ∫gu) / ∫gu` with the solver's own boundary quadrature.
fn energy_defect(d: &Domain, g: &NeumannFlux, gamma: &RobinCoefficient, h: f64) -> Result<f64, robin_lab::Error> {
    let m = mesh(d, h);
    let u = solve_forward_on(&m, d, g, gamma)?;
    let samples = g.sample(&m, d);
    let robin = gamma.edge_values(&m, d);
    let t = u.trace();
    let nb = m.n_boundary();
    let (mut work, mut robin_term) = (0.0, 0.0);
    for k in 0..nb {
        let l = m.edge_length(k);
        for (q, (s, w)) in GAUSS3.mapped(0.0, 1.0).enumerate() {
            let uv = t[k] * (1.0 - s) + t[(k + 1) % nb] * s;
            let kv = robin[k][0] * (1.0 - s) + robin[k][1] * s;
            work += samples[k][q] * uv * w * l;
            robin_term += kv * uv * uv * w * l;
        }
    }
    Ok(((u.dirichlet_energy() + robin_term - work) / work).abs())
}

fn ramp(from: f64, to: f64) -> NeumannFlux {
    let piece = FluxPiece {
        from,
        to,
        start_value: 0.0,
        end_value: 1.0,
    };
    NeumannFlux::new(vec![piece], 0.0, f64::INFINITY, 1.0).expect("flux")
}

fn energy_identity() -> Outcome {
    let square = domain("square.toml");
    let disk = domain("disk.toml");
    let l_shape = domain("l_shape.toml");
    let gamma_ramp = RobinCoefficient::piecewise_linear(vec![(0.0, 0.2), (1.0, 0.6)], 1.0)?;
    let dl = disk.length();
    let disk_gamma = RobinCoefficient::piecewise_linear(vec![(0.0, 0.3), (disk.gamma_i.span, 0.7)], 1.0)?;
    let cases: Vec<(&str, &Domain, NeumannFlux, RobinCoefficient, f64)> = vec![
        ("square/y+2", &square, top_flux(), half(), 1.0 / 16.0),
        ("square/y+2", &square, top_flux(), half(), 1.0 / 32.0),
        ("square/y+2", &square, top_flux(), half(), 1.0 / 64.0),
        ("square/ramp", &square, ramp(2.0, 3.0), gamma_ramp, 1.0 / 32.0),
        ("disk", &disk, NeumannFlux::constant_on(0.05 * dl, 0.45 * dl, 1.0), disk_gamma, 1.0 / 32.0),
        ("l_shape", &l_shape, NeumannFlux::constant_on(3.25, 4.75, 1.0), half(), 1.0 / 32.0),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, d, g, gamma, h) in &cases {
        let rel = energy_defect(d, g, gamma, *h)?;
        worst = worst.max(rel);
        parts.push(format!("{name}@1/{:.0} {rel:.1e}", 1.0 / h));
    }
    Ok((worst <= 1e-8, format!("worst {worst:.2e}; {}", parts.join(", "))))
}

fn quotient_recovery() -> Outcome {
    let d = domain("square.toml");
    let mut ok = true;
    let mut parts = Vec::new();
    for h in HS {
        let u = solve_forward(&d, &top_flux(), &half(), h)?;
        let exact = ContinuationResult::from_field(&u, &d);
        let mut est = recover_gamma(&d, &exact, &RecoveryConfig::default())?;
        let e = est.compare(&half(), NormMode::LinftyMargin).linf;
        ok &= e <= 10.0 * h;
        parts.push(format!("h=1/{:.0}: {e:.2e} (≤ {:.2e})", 1.0 / h, 10.0 * h));
    }
    Ok((ok, parts.join("; ")))
}

fn clean_continuation() -> Outcome {
    let d = domain("square.toml");
    let target = ArcSampling::uniform(&d, Side::I, 41)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for p in harmonic_suite(Vec2::new(0.5, 0.5), 0.5) {
        let data = CauchyData::from_analytic(&d, 32, |x| p.eval(x).0, |x| p.eval(x).1)?;
        let r = continue_cauchy(&d, &data, 10, Regularization::Fixed { lambda: 1e-10 }, &target)?;
        let mut err: f64 = 0.0;
        for (i, x) in target.points.iter().enumerate() {
            let (v, g) = p.eval(*x);
            err = err.max((r.trace[i] - v).abs());
            err = err.max((r.flux[i] - g.dot(&target.normals[i])).abs());
        }
        worst = worst.max(err);
        parts.push(format!("{} {err:.1e}", p.name()));
    }
    Ok((worst <= 1e-6, format!("worst {worst:.2e} over trace and flux; {}", parts.join(", "))))
}

fn on_square(h: f64, f: impl Fn(Vec2) -> f64) -> Result<DiscreteField, robin_lab::Error> {
    DiscreteField::interpolate(mesh(&domain("square.toml"), h), f)
}

fn mid() -> Vec2 {
    Vec2::new(0.5, 0.0)
}

fn doubling() -> Outcome {
    let d = domain("square.toml");
    let flat = on_square(1.0 / 64.0, |_| 1.0)?;
    let (lo, _) = admissible_window(&flat, &d, &mid(), d.r0());
    let p = doubling_profile(&flat, &d, &mid(), lo, 0.2, 6)?;
    let flat_dev = p.ratios.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    let linear = on_square(1.0 / 64.0, |x| x.x - 0.5)?;
    let q = doubling_profile(&linear, &d, &mid(), lo, 0.2, 6)?;
    let lin_dev = q.ratios.iter().map(|r| (r - 8.0).abs()).fold(0.0, f64::max);
    Ok((
        flat_dev <= 1e-6 && lin_dev <= 1e-3,
        format!(
            "{} radii in [{lo:.4}, 0.2]: |ratio − 2| ≤ {flat_dev:.1e}, |ratio − 8| ≤ {lin_dev:.1e}",
            p.radii.len()
        ),
    ))
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| hi * (lo / hi).powf(j as f64 / (n - 1) as f64)).collect()
}

fn muckenhoupt() -> Outcome {
    let d = domain("square.toml");
    let u = on_square(1.0 / 64.0, |x| x.x - 0.5)?;
    let (lo, hi) = admissible_window(&u, &d, &mid(), d.r0());
    let radii = geometric(lo, hi, 8);
    let four = muckenhoupt_profile(&u, &d, &mid(), 4.0, &radii)?;
    let mut dev: f64 = 0.0;
    let mut all = true;
    for v in &four.products {
        match v {
            Some(v) => dev = dev.max((v / 9.0 - 1.0).abs()),
            None => all = false,
        }
    }
    let three = muckenhoupt_profile(&u, &d, &mid(), 3.0, &radii)?;
    Ok((
        all && !four.divergent && dev <= 0.01 && three.divergent,
        format!(
            "{} radii in [{lo:.4}, {hi:.4}]: p=4 max rel dev from 9 {dev:.1e}; p=3 divergent = {}",
            radii.len(),
            three.divergent
        ),
    ))
}

fn vanishing() -> Outcome {
    let d = domain("square.toml");
    let radii = [0.2, 0.16, 0.13, 0.1, 0.08];
    let t = vanishing_rate_fit(&on_square(1.0 / 64.0, |x| x.x - 0.5)?, &d, &mid(), &radii)?;
    let c = vanishing_rate_fit(&on_square(1.0 / 64.0, |_| 2.0)?, &d, &mid(), &radii)?;
    let (et, ec) = (t.polynomial.exponent, c.polynomial.exponent);
    Ok((
        (et - 3.0).abs() <= 0.02 && (ec - 1.0).abs() <= 0.02,
        format!("u = t: {et:.6}; constant: {ec:.6}"),
    ))
}

fn weighted_interpolation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let mut exact = true;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eps = 10f64.powf(rng.random_range(-5.0..-1.0));
        let m = rng.random_range(0.5..3.0);
        let k = rng.random_range(0.25..3.0);
        let alpha = rng.random_range(0.05..=1.0);
        let e = rng.random_range(0.5..3.0);
        let r2 = rng.random_range(0.05..1.0);
        let b = weighted_interpolation_bound(eps, m, k, alpha, e, r2)?;
        exact &= b.delta_prime == alpha / (2.0 * k + alpha);
        let n = (r2 / 1e-6).ceil() as usize;
        let grid = (1..=n)
            .map(|i| weighted_tradeoff(r2 * i as f64 / n as f64, eps, m, k, alpha, e))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((b.bound - grid).abs() / grid);
    }
    Ok((
        exact && worst <= 1e-5,
        format!("δ′ exact on all draws: {exact}; worst relative gap to grid search {worst:.2e}"),
    ))
}

fn stability_sweeps() -> Outcome {
    let scratch = tempfile::tempdir()?;
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["disk_sweep.toml", "l_shape_sweep.toml"] {
        let cfg = ExperimentConfig::load(&configs().join(name))?;
        let setup = cfg.decades() >= 4.0 && cfg.draws >= 20 && (cfg.h - 1.0 / 64.0).abs() < 1e-12;
        let t = Instant::now();
        let s = run_stability_sweep(&cfg)?;
        let secs = t.elapsed().as_secs_f64();
        let out = scratch.path().join(name.trim_end_matches(".toml"));
        let artifacts = robin_lab::experiment::Artifacts {
            sweep: Some(&s),
            ..robin_lab::experiment::Artifacts::new(&cfg)
        };
        let files = emit_report(&out, &artifacts)?;
        let table = files.iter().any(|f| f.ends_with("modulus.csv"));
        let monotone = s.is_monotone();
        ok &= setup && monotone && table && s.aborted.is_none();
        let medians: Vec<String> = s.medians().iter().map(|(_, m)| format!("{m:.2e}")).collect();
        let winner = s
            .fits
            .as_ref()
            .map_or("none".to_string(), |f| f.winner.map_or("no clear winner".into(), |w| w.name().into()));
        parts.push(format!(
            "{}: medians [{}], monotone {monotone}, modulus table {table}, best fit {winner}, {secs:.1}s",
            s.domain,
            medians.join(", ")
        ));
    }
    let total = start.elapsed().as_secs_f64();
    ok &= total < 1800.0;
    Ok((ok, format!("{}; total {total:.1}s", parts.join("; "))))
}

fn rellich() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["square.toml", "disk.toml"] {
        let d = domain(name);
        let suite = harmonic_suite(d.centroid(), 0.5);
        let coarse = rellich_calibration(&mesh(&d, 1.0 / 32.0), &suite)?;
        let fine = rellich_calibration(&mesh(&d, 1.0 / 64.0), &suite)?;
        let change = (coarse.fitted_c / fine.fitted_c - 1.0).abs();
        let hold = coarse.all_hold() && fine.all_hold();
        ok &= suite.len() == 10 && change < 0.1 && hold;
        parts.push(format!(
            "{}: C {:.4} → {:.4} ({:.1}%), all hold {hold}",
            d.name,
            coarse.fitted_c,
            fine.fitted_c,
            100.0 * change
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn csv_bodies(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path)?);
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::load(&configs().join("square.toml"))?;
    let scratch = tempfile::tempdir()?;
    let mut bundles = Vec::new();
    for run in ["a", "b"] {
        let dir = scratch.path().join(run);
        let p = Pipeline::run(&cfg)?;
        emit_report(&dir, &p.artifacts(&cfg, &[]))?;
        bundles.push(csv_bodies(&dir)?);
    }
    let differing: Vec<&String> = bundles[0]
        .iter()
        .filter(|(k, v)| bundles[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let same_names = bundles[0].keys().eq(bundles[1].keys());
    Ok((
        same_names && differing.is_empty() && !bundles[0].is_empty(),
        format!("{} CSV files compared, {} differ {:?}", bundles[0].len(), differing.len(), differing),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("manufactured forward accuracy", forward_accuracy),
        ("energy identity", energy_identity),
        ("quotient recovery from exact traces", quotient_recovery),
        ("clean continuation round trip", clean_continuation),
        ("doubling constants", doubling),
        ("Muckenhoupt analytic check", muckenhoupt),
        ("vanishing-rate fits", vanishing),
        ("weighted interpolation bound", weighted_interpolation),
        ("stability sweeps", stability_sweeps),
        ("Rellich audit", rellich),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (passed, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
