//! Empirical audits of the quantitative boundary estimates on solved fields:
//! surface doubling, vanishing rates, Muckenhoupt products, Rellich-type
//! norm inequalities and the local Cauchy inequality.

mod cauchy;
mod profiles;
mod rellich;
mod surface;

pub use cauchy::{
    calibrate_local_cauchy, calibration_suite, local_cauchy_bound_check, probe_points, CauchyCalibration,
    LocalCauchyReport,
};
pub use profiles::{
    doubling_profile, muckenhoupt_profile, vanishing_rate_fit, volume_doubling_profile, DoublingProfile,
    ExponentialRate, MuckenhouptProfile, PolynomialRate, VanishingModel, VanishingRateFit, VolumeDoublingProfile,
    EXPONENTIAL_K_GRID,
};
pub use rellich::{
    harmonic_field, harmonic_suite, rellich_audit, rellich_calibration, HarmonicPolynomial, RellichCalibration,
    RellichReport, HARMONIC_TOLERANCE,
};
pub(crate) use surface::radius_grid;
pub use surface::{admissible_window, surface_l2_sq, surface_measure, surface_negative_power, MIN_BALL_NODES};

#[cfg(test)]
mod tests {
    use std::sync::{Arc, OnceLock};

    use proptest::prelude::*;

    use super::*;
    use crate::error::Error;
    use crate::forward::DiscreteField;
    use crate::geometry::Vec2;
    use crate::mesh::tests::{disk, l_shape, unit_square};
    use crate::mesh::{MeshKind, TriMesh};

    fn square_mesh(n: usize) -> Arc<TriMesh> {
        static MESHES: OnceLock<Vec<Arc<TriMesh>>> = OnceLock::new();
        let all = MESHES.get_or_init(|| {
            [16, 32, 64]
                .iter()
                .map(|&k| Arc::new(TriMesh::generate(&unit_square(), 1.0 / k as f64, MeshKind::Auto).unwrap()))
                .collect()
        });
        all.iter().find(|m| (m.h * n as f64 - 1.0).abs() < 1e-9).unwrap().clone()
    }

    fn field(n: usize, f: impl Fn(Vec2) -> f64) -> DiscreteField {
        DiscreteField::interpolate(square_mesh(n), f).unwrap()
    }

    fn mid() -> Vec2 {
        Vec2::new(0.5, 0.0)
    }

    #[test]
    fn constant_trace_doubles_arclength() {
        let u = field(64, |_| 2.0);
        let p = doubling_profile(&u, &unit_square(), &mid(), 0.07, 0.2, 6).unwrap();
        for r in &p.ratios {
            assert!((r - 2.0).abs() < 1e-12, "{r}");
        }
        for (j, r) in p.radii.iter().enumerate() {
            assert!((p.inner[j] - 8.0 * r).abs() < 1e-12);
        }
        assert!(p.radii.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn linear_trace_doubles_by_eight() {
        let u = field(64, |x| x.x - 0.5);
        let p = doubling_profile(&u, &unit_square(), &mid(), 0.07, 0.2, 6).unwrap();
        for (j, r) in p.radii.iter().enumerate() {
            assert!((p.inner[j] - 2.0 * r.powi(3) / 3.0).abs() < 1e-14);
            assert!((p.ratios[j] - 8.0).abs() < 1e-9, "{}", p.ratios[j]);
        }
        assert!((p.k1_hat - 8.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_preconditions() {
        let u = field(32, |_| 1.0);
        let d = unit_square();
        match doubling_profile(&u, &d, &mid(), 0.05, 0.2, 4) {
            Err(Error::UnderResolved { min_radius, .. }) => {
                assert!(min_radius > 0.05);
                doubling_profile(&u, &d, &mid(), min_radius, 0.2, 4).unwrap();
            }
            other => panic!("{other:?}"),
        }
        // 2·r_max reaches the accessible sides
        assert!(matches!(
            doubling_profile(&u, &d, &mid(), 0.15, 0.3, 4),
            Err(Error::OutsideRegime(_))
        ));
        // outside the margin subset
        assert!(matches!(
            doubling_profile(&u, &d, &Vec2::new(0.1, 0.0), 0.15, 0.2, 4),
            Err(Error::OutsideRegime(_))
        ));
    }

    #[test]
    fn doubling_constant_stable_on_disk() {
        let d = disk();
        let g = crate::forward::NeumannFlux::constant_on(0.25 * d.length(), 0.25 * d.length() + 1.0, 1.0);
        let gamma = crate::forward::RobinCoefficient::constant(0.5, 0.5);
        let x0 = d.curve.point_at(0.75 * d.length());
        let k1: Vec<f64> = [0.05, 0.025]
            .iter()
            .map(|&h| {
                let u = crate::forward::solve_forward(&d, &g, &gamma, h).unwrap();
                doubling_profile(&u, &d, &x0, 0.25, 0.4, 5).unwrap().k1_hat
            })
            .collect();
        assert!(k1[0] >= 1.0 && (k1[0] / k1[1] - 1.0).abs() < 0.2, "{k1:?}");
    }

    #[test]
    fn vanishing_exponents() {
        let d = unit_square();
        let radii = [0.2, 0.16, 0.13, 0.1, 0.08];
        let t = vanishing_rate_fit(&field(64, |x| x.x - 0.5), &d, &mid(), &radii).unwrap();
        assert!((t.polynomial.exponent - 3.0).abs() < 1e-9, "{:?}", t.polynomial);
        assert!(t.polynomial.residual < 1e-10);
        assert_eq!(t.model, VanishingModel::Polynomial);
        let c = vanishing_rate_fit(&field(64, |_| 2.0), &d, &mid(), &radii).unwrap();
        assert!((c.polynomial.exponent - 1.0).abs() < 1e-9);
        assert!((c.polynomial.intercept - 8f64.ln()).abs() < 1e-9);
        assert!(matches!(
            vanishing_rate_fit(&field(64, |_| 0.0), &d, &mid(), &radii),
            Err(Error::Degenerate(_))
        ));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,lhs,rhs,ratio\n"));
        assert_eq!(text.lines().count(), radii.len() + 1);
    }

    #[test]
    fn reflex_corner_mode_exponent() {
        let d = l_shape();
        let mesh = Arc::new(TriMesh::generate(&d, 1.0 / 64.0, MeshKind::Auto).unwrap());
        // Neumann singular mode ρ^{2/3} cos(2θ/3) with θ measured from the edge toward (1, 0)
        let u = DiscreteField::interpolate(mesh, |x| {
            let th = x.y.atan2(x.x).rem_euclid(2.0 * std::f64::consts::PI);
            x.norm().powf(2.0 / 3.0) * (2.0 * th / 3.0).cos()
        })
        .unwrap();
        let radii = [0.25, 0.2, 0.16, 0.125, 0.1, 0.08];
        let fit = vanishing_rate_fit(&u, &d, &Vec2::zeros(), &radii).unwrap();
        for (r, i) in radii.iter().zip(&fit.integrals) {
            let exact = 6.0 / 7.0 * r.powf(7.0 / 3.0);
            assert!((i / exact - 1.0).abs() < 0.02, "r = {r}: {i} vs {exact}");
        }
        assert!((fit.polynomial.exponent - 7.0 / 3.0).abs() < 0.02, "{:?}", fit.polynomial);
    }

    #[test]
    fn muckenhoupt_analytic_products() {
        let d = unit_square();
        let radii = [0.2, 0.15, 0.1, 0.08];
        for p in [1.5, 2.0, 4.0] {
            let c = muckenhoupt_profile(&field(64, |_| 3.0), &d, &mid(), p, &radii).unwrap();
            assert!(c.products.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
        }
        let t = field(64, |x| x.x - 0.5);
        let four = muckenhoupt_profile(&t, &d, &mid(), 4.0, &radii).unwrap();
        for v in &four.products {
            assert!((v.unwrap() - 9.0).abs() < 1e-9, "{v:?}");
        }
        assert!(!four.divergent && (four.a_hat - 9.0).abs() < 1e-9);
        let three = muckenhoupt_profile(&t, &d, &mid(), 3.0, &radii).unwrap();
        assert!(three.divergent && three.products.iter().all(Option::is_none));
        assert!(matches!(
            muckenhoupt_profile(&t, &d, &mid(), 1.0, &radii),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            muckenhoupt_profile(&field(64, |_| 0.0), &d, &mid(), 2.0, &radii),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sparser_radius_grid_keeps_suprema() {
        let d = unit_square();
        let u = crate::forward::solve_forward(
            &d,
            &crate::forward::NeumannFlux::constant_on(2.0, 3.0, 1.0),
            &crate::forward::RobinCoefficient::constant(0.5, 0.5),
            1.0 / 64.0,
        )
        .unwrap();
        let dense = doubling_profile(&u, &d, &mid(), 0.07, 0.2, 9).unwrap();
        let sparse = doubling_profile(&u, &d, &mid(), 0.07, 0.2, 5).unwrap();
        assert!((dense.k1_hat / sparse.k1_hat - 1.0).abs() < 0.05);
        let grid = |n: usize| -> Vec<f64> { (0..n).map(|j| 0.2 - 0.13 * j as f64 / (n - 1) as f64).collect() };
        let a = muckenhoupt_profile(&u, &d, &mid(), 2.0, &grid(9)).unwrap();
        let b = muckenhoupt_profile(&u, &d, &mid(), 2.0, &grid(5)).unwrap();
        assert!((a.a_hat / b.a_hat - 1.0).abs() < 0.05);
    }

    #[test]
    fn rellich_affine_example() {
        let suite = harmonic_suite(Vec2::new(0.5, 0.5), 0.5);
        let u = harmonic_field(&square_mesh(64), &suite[0]).unwrap();
        let rep = rellich_audit(&u).unwrap();
        assert!((rep.h1_sq - 22.0 / 3.0).abs() < 1e-3, "{rep:?}");
        assert!((rep.tangential_sq - 2.0).abs() < 1e-6, "{rep:?}");
        assert!((rep.normal_sq - 2.0).abs() < 0.05, "{rep:?}");
        assert!((rep.normal_ratio - 3.0 / 14.0).abs() < 0.01, "{rep:?}");
        assert!(rep.holds_with(rep.required_c()));
        let c = rellich_audit(&field(32, |_| 1.0)).unwrap();
        assert!(c.normal_sq < 1e-20 && c.tangential_sq < 1e-20 && c.h1_sq > 0.99);
        assert!(matches!(
            rellich_audit(&field(32, |x| x.x * x.x + x.y * x.y)),
            Err(Error::NotHarmonic { .. })
        ));
    }

    #[test]
    fn polynomial_gradients_match_differences() {
        for p in harmonic_suite(Vec2::new(0.3, -0.2), 0.7) {
            let x = Vec2::new(0.41, 0.77);
            let (_, g) = p.eval(x);
            let e = 1e-6;
            let dx = (p.eval(x + Vec2::new(e, 0.0)).0 - p.eval(x - Vec2::new(e, 0.0)).0) / (2.0 * e);
            let dy = (p.eval(x + Vec2::new(0.0, e)).0 - p.eval(x - Vec2::new(0.0, e)).0) / (2.0 * e);
            assert!((g.x - dx).abs() < 1e-6 && (g.y - dy).abs() < 1e-6, "{}", p.name());
            // harmonic: five-point Laplacian vanishes
            let lap = [Vec2::new(e, 0.0), Vec2::new(-e, 0.0), Vec2::new(0.0, e), Vec2::new(0.0, -e)]
                .iter()
                .map(|d| p.eval(x + d).0)
                .sum::<f64>()
                - 4.0 * p.eval(x).0;
            assert!(lap.abs() < 1e-4 * e * e + 1e-12, "{}", p.name());
        }
    }

    #[test]
    fn rellich_constant_is_mesh_stable() {
        let suite = harmonic_suite(Vec2::new(0.5, 0.5), 0.5);
        assert_eq!(suite.len(), 10);
        let coarse = rellich_calibration(&square_mesh(16), &suite).unwrap();
        let fine = rellich_calibration(&square_mesh(32), &suite).unwrap();
        assert!(coarse.all_hold() && fine.all_hold());
        assert!((coarse.fitted_c / fine.fitted_c - 1.0).abs() < 0.1, "{} {}", coarse.fitted_c, fine.fitted_c);
    }

    fn calibration() -> &'static CauchyCalibration {
        static CAL: OnceLock<CauchyCalibration> = OnceLock::new();
        CAL.get_or_init(|| {
            let d = unit_square();
            let suite = calibration_suite(&square_mesh(32), &d).unwrap();
            calibrate_local_cauchy(&d, &suite, &probe_points(&d, 3), &[0.15, 0.2, 0.25]).unwrap()
        })
    }

    #[test]
    fn calibration_suite_starts_with_affine_solution() {
        let suite = calibration_suite(&square_mesh(32), &unit_square()).unwrap();
        assert_eq!(suite.len(), 10);
        let err = suite[0]
            .mesh
            .nodes
            .iter()
            .zip(&suite[0].values)
            .map(|(p, v)| (v - p.y - 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn local_cauchy_inequality_holds_on_examples() {
        let d = unit_square();
        let cal = calibration();
        assert!(cal.delta > 0.0 && cal.delta <= 1.0 && cal.c > 0.0);
        let u = calibration_suite(&square_mesh(32), &d).unwrap().swap_remove(0);
        let rep = local_cauchy_bound_check(&u, &d, &mid(), 0.2, cal).unwrap();
        assert!(rep.satisfied, "{rep:?}");
        // normalization makes the report scale free
        let scaled = local_cauchy_bound_check(&u.scaled(7.5), &d, &mid(), 0.2, cal).unwrap();
        assert!((scaled.lhs / rep.lhs - 1.0).abs() < 1e-12 && (scaled.rhs / rep.rhs - 1.0).abs() < 1e-12);
        let flat = local_cauchy_bound_check(&field(32, |_| 2.0), &d, &mid(), 0.2, cal).unwrap();
        assert!((flat.surface - 0.4).abs() < 1e-12);
        assert!(flat.satisfied, "{flat:?} with {cal:?}");
        assert!(matches!(
            local_cauchy_bound_check(&u, &d, &mid(), 0.05, cal),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn volume_doubling_of_constant() {
        let z = field(64, |_| 1.0);
        let p = volume_doubling_profile(&z, &mid(), &[0.2, 0.1]).unwrap();
        for r in &p.ratios {
            assert!((r - 4.0).abs() < 0.3, "{r}");
        }
        assert!(p.under_resolved.iter().all(|u| !u));
    }

    #[test]
    fn admissible_window_bounds() {
        let u = field(32, |_| 1.0);
        let (lo, hi) = admissible_window(&u, &unit_square(), &mid(), 0.3);
        assert!((lo - 0.125).abs() < 1e-12);
        assert!((hi - 0.25).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn doubling_ratios_at_least_one(a in -2.0..2.0f64, b in -2.0..2.0f64, c in 0.1..3.0f64) {
            let u = field(32, |x| a * (x.x - 0.5) + b * x.y + c);
            let p = doubling_profile(&u, &unit_square(), &mid(), 0.13, 0.2, 4).unwrap();
            prop_assert!(p.ratios.iter().all(|r| *r >= 1.0));
        }

        #[test]
        fn muckenhoupt_scale_invariant_and_bounded_below(
            a in -2.0..2.0f64, c in 0.05..2.0f64, s in 0.01..100.0f64, p in 1.5..6.0f64
        ) {
            let d = unit_square();
            let radii = [0.2, 0.15];
            let u = field(32, |x| a * (x.x - 0.5) + c);
            let one = muckenhoupt_profile(&u, &d, &mid(), p, &radii).unwrap();
            let two = muckenhoupt_profile(&u.scaled(s), &d, &mid(), p, &radii).unwrap();
            for (x, y) in one.products.iter().zip(&two.products) {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        prop_assert!((x / y - 1.0).abs() < 1e-10);
                        prop_assert!(*x >= 1.0 - 1e-12);
                    }
                    (None, None) => {}
                    _ => prop_assert!(false, "divergence flag depends on scale"),
                }
            }
        }
    }
}
