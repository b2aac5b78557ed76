//! Config-driven experiments: forward solve, noise injection, continuation,
//! recovery, estimate profiling, stability-modulus fits and reports.

mod config;
mod modulus;
mod report;
mod sweep;

pub use config::{AprioriData, BumpSpec, PlateauSpec, DomainSource, EstimateWindow, ExperimentConfig, FluxSpec, GammaSpec, Problem};
pub use modulus::{fit_modulus, ModulusFit, ModulusModel, ModulusTable, MIN_DECADES, WINNER_MARGIN};
pub use report::{emit_report, profile_estimates, standard_checks, Artifacts, CenterProfiles, Check, EstimateSummary, Pipeline};
pub use sweep::{
    draw_rng, is_monotone, run_draw, run_stability_sweep, run_stability_sweep_on, ContinuedDraw, DrawOutcome,
    LevelSummary, SweepReport, ABORT_FRACTION, MONOTONE_TOLERANCE,
};

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::error::Error;
    use crate::recovery::FloorMode;

    pub(crate) fn config_path(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
    }

    fn small_square() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::load(&config_path("square.toml")).unwrap();
        cfg.h = 1.0 / 16.0;
        cfg.draws = 4;
        cfg.eps = vec![1e-2, 1e-3, 1e-4, 0.0];
        cfg
    }

    #[test]
    fn shipped_configs_load() {
        for name in ["square.toml", "disk_sweep.toml", "l_shape_sweep.toml"] {
            let cfg = ExperimentConfig::load(&config_path(name)).unwrap();
            assert!(cfg.domain_file().is_ok(), "{name}");
            assert_eq!(cfg.decades(), 4.0);
            assert_eq!(cfg.noisy_levels().len(), 5);
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::load(&config_path("disk_sweep.toml")).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back.eps, cfg.eps);
        assert_eq!(back.degree, 20);
        assert_eq!(back.gamma.plateau.unwrap().ramp, 0.25);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = small_square();
        let mut bad = Vec::new();
        let mut c = base.clone();
        c.eps = vec![1e-3, 1e-2];
        bad.push(c);
        let mut c = base.clone();
        c.eps = vec![1.0, 1e-2];
        bad.push(c);
        let mut c = base.clone();
        c.draws = 0;
        bad.push(c);
        let mut c = base.clone();
        c.h = 0.0;
        bad.push(c);
        let mut c = base.clone();
        c.eps.clear();
        bad.push(c);
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Configuration(_))), "{:?}", c.eps);
        }
    }

    #[test]
    fn plateau_knots() {
        let spec = GammaSpec {
            knots: Vec::new(),
            plateau: Some(PlateauSpec { value: 0.5, ramp: 0.25, segments: 16 }),
            gamma0: 1.5,
        };
        let k = spec.knots_on(2.0).unwrap();
        assert_eq!(k.len(), 34);
        assert_eq!(k[0], (0.0, 0.0));
        assert_eq!(k[16], (0.25, 0.5));
        assert_eq!(k[17], (1.75, 0.5));
        assert!((k[33].0 - 2.0).abs() < 1e-15 && k[33].1 == 0.0);
        assert!(k.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(spec.knots_on(0.4).is_err());
        let both = GammaSpec { knots: vec![[0.0, 1.0]], ..spec };
        assert!(both.knots_on(2.0).is_err());
    }

    #[test]
    fn bump_pieces_are_continuous() {
        let b = BumpSpec { from: 1.0, to: 2.0, amplitude: 3.0, segments: 8 };
        let p = b.pieces();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0].start_value, 0.0);
        assert!(p[7].end_value.abs() < 1e-15);
        assert!((p[3].end_value - 3.0).abs() < 1e-15);
        assert!(p.windows(2).all(|w| w[0].to == w[1].from && w[0].end_value == w[1].start_value));
    }

    #[test]
    fn modulus_round_trip_single_log() {
        let pairs: Vec<(f64, f64)> =
            [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&e: &f64| (e, 2.0 * e.ln().abs().powf(-1.5))).collect();
        let t = fit_modulus(&pairs).unwrap();
        let f = t.fit(ModulusModel::SingleLog);
        assert!((f.c - 2.0).abs() < 0.02 && (f.exponent - 1.5).abs() < 0.015, "{f:?}");
        assert!(f.residual < 1e-20 && f.admissible);
        assert_eq!(t.winner, Some(ModulusModel::SingleLog));
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn modulus_double_log_wins_on_its_data() {
        let pairs: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
            .iter()
            .map(|&e: &f64| (e, 0.7 * e.ln().abs().ln().powf(-2.0)))
            .collect();
        let t = fit_modulus(&pairs).unwrap();
        let f = t.fit(ModulusModel::DoubleLog);
        assert!((f.c - 0.7).abs() < 0.007 && (f.exponent - 2.0).abs() < 0.02, "{f:?}");
        assert_eq!(t.winner, Some(ModulusModel::DoubleLog));
        for other in [ModulusModel::SingleLog, ModulusModel::Power] {
            assert!(t.fit(other).residual > f.residual / (1.0 - WINNER_MARGIN));
        }
    }

    #[test]
    fn modulus_rejects_bad_input() {
        let ok = [(1e-2, 0.5), (1e-3, 0.4), (1e-4, 0.3), (1e-5, 0.2)];
        assert!(fit_modulus(&ok).is_ok());
        assert!(matches!(fit_modulus(&ok[..3]), Err(Error::InvalidInput(_))));
        let mut big = ok;
        big[0].0 = 1.0;
        assert!(matches!(fit_modulus(&big), Err(Error::InvalidInput(_))));
        let mut zero = ok;
        zero[2].1 = 0.0;
        assert!(matches!(fit_modulus(&zero), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn narrow_grid_warns_and_ties_have_no_winner() {
        let pairs = [(1e-2, 0.3), (5e-3, 0.3), (2e-3, 0.3), (1e-3, 0.3)];
        let t = fit_modulus(&pairs).unwrap();
        assert_eq!(t.warnings.len(), 1);
        assert_eq!(t.winner, None);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("model,C,exponent,residual,admissible,winner\n"));
    }

    #[test]
    fn monotone_tolerance() {
        assert!(is_monotone(&[(1e-2, 1.0), (1e-3, 0.5), (1e-4, 0.5)]));
        assert!(is_monotone(&[(1e-2, 1.0), (1e-3, 1.09)]));
        assert!(!is_monotone(&[(1e-2, 1.0), (1e-3, 1.2)]));
        assert!(!is_monotone(&[(1e-2, 1.0), (1e-3, 0.5), (1e-4, 0.6)]));
    }

    #[test]
    fn draw_streams_are_independent_and_repeatable() {
        let a: u64 = draw_rng(3, 1, 2).random();
        assert_eq!(a, draw_rng(3, 1, 2).random::<u64>());
        assert_ne!(a, draw_rng(3, 2, 1).random::<u64>());
        assert_ne!(a, draw_rng(4, 1, 2).random::<u64>());
    }

    #[test]
    fn square_sweep_is_accurate_and_deterministic() {
        let cfg = small_square();
        let a = run_stability_sweep(&cfg).unwrap();
        assert!(a.aborted.is_none());
        assert_eq!(a.levels.len(), 3);
        assert!(a.levels.iter().all(|l| l.failures == 0 && l.draws.len() == 4));
        let clean = a.clean.as_ref().unwrap();
        assert_eq!(clean.draws.len(), 1);
        assert!(a.is_monotone(), "{:?}", a.medians());
        assert_eq!(a.clean_within_floor(), Some(true));
        // y + 2 is in the basis, so the error follows the noise
        assert!(a.medians()[2].1 < 1e-2, "{:?}", a.medians());
        assert!(a.fits.is_none());
        assert!(a.warnings.iter().any(|w| w.contains("decades")));
        let b = run_stability_sweep(&cfg).unwrap();
        let csv = |r: &SweepReport| {
            let mut d = Vec::new();
            r.write_draws_csv(&mut d).unwrap();
            r.write_levels_csv(&mut d).unwrap();
            d
        };
        assert_eq!(csv(&a), csv(&b));
    }

    #[test]
    fn failing_draws_abort_the_sweep() {
        let mut cfg = small_square();
        cfg.recovery.floor = FloorMode::Absolute { tau: 1e6 };
        let r = run_stability_sweep(&cfg).unwrap();
        assert!(r.aborted.is_some());
        assert_eq!(r.levels.len(), 1);
        assert_eq!(r.levels[0].failures, 4);
        assert!(r.levels[0].median_linf.is_none());
        assert!(r.fe_floor.is_none());
        let mut buf = Vec::new();
        r.write_draws_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("failed:"));
    }

    proptest! {
        #[test]
        fn modulus_round_trips_every_model(c in 0.1f64..10.0, k in 0.2f64..3.0, pick in 0usize..3) {
            let model = ModulusModel::ALL[pick];
            let pairs: Vec<(f64, f64)> =
                [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&e| (e, model.eval(c, k, e))).collect();
            let f = *fit_modulus(&pairs).unwrap().fit(model);
            prop_assert!((f.c - c).abs() <= 0.01 * c);
            prop_assert!((f.exponent - k).abs() <= 0.01 * k);
            prop_assert!(f.admissible);
        }

        #[test]
        fn monotone_sequences_pass(mut v in proptest::collection::vec(0.01f64..1.0, 2..8)) {
            v.sort_by(|a, b| b.total_cmp(a));
            let pairs: Vec<(f64, f64)> = v.iter().enumerate().map(|(i, e)| (10f64.powi(-(i as i32) - 1), *e)).collect();
            prop_assert!(is_monotone(&pairs));
        }
    }
}
