//! P1 finite elements for the mixed Neumann/Robin Laplace problem, the
//! auxiliary problem and the quotient field.

mod data;
mod field;
mod solve;

pub use data::{edge_params, sample_edges, EdgeSamples, FluxPiece, FluxReport, NeumannFlux, RobinCoefficient};
pub(crate) use field::fmt;
pub use field::{quotient_field, DiscreteField, QuotientField, SolveReport};
pub use solve::{
    solve_auxiliary, solve_auxiliary_robin, solve_auxiliary_with, solve_boundary_problem, solve_forward,
    solve_forward_on, AuxiliaryField, BoundaryProblem, Normalization, SOLVER_TOLERANCE,
};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::Error;
    use crate::geometry::{Side, Vec2};
    use crate::mesh::tests::unit_square;
    use crate::mesh::{MeshKind, TriMesh};

    fn top_unit_flux() -> NeumannFlux {
        NeumannFlux::constant_on(2.0, 3.0, 1.0)
    }

    fn square_mesh(h: f64) -> Arc<TriMesh> {
        Arc::new(TriMesh::generate(&unit_square(), h, MeshKind::Auto).unwrap())
    }

    #[test]
    fn manufactured_linear_solution() {
        let d = unit_square();
        for h in [1.0 / 16.0, 1.0 / 32.0] {
            let u = solve_forward(&d, &top_unit_flux(), &RobinCoefficient::constant(0.5, 0.5), h).unwrap();
            let err = u
                .mesh
                .nodes
                .iter()
                .zip(&u.values)
                .map(|(p, v)| (v - (p.y + 2.0)).abs())
                .fold(0.0, f64::max);
            assert!(err <= 5.0 * h * h, "h = {h}: {err}");
            let mid = u.value_at(&Vec2::new(0.5, 0.5)).unwrap();
            assert!((mid - 2.5).abs() < 1e-8);
            assert!(u.solve.unwrap().relative_residual <= 1e-9);
        }
    }

    fn saddle_flux() -> NeumannFlux {
        // u = x² − y²: ∂u/∂ν = 2 on the right, −2 on top, 0 on the left and bottom
        let piece = |from: f64, to: f64, v: f64| FluxPiece {
            from,
            to,
            start_value: v,
            end_value: v,
        };
        NeumannFlux::new(vec![piece(1.0, 2.0, 2.0), piece(2.0, 3.0, -2.0)], 0.0, f64::INFINITY, 1.0).unwrap()
    }

    #[test]
    fn pure_neumann_reproduces_saddle() {
        let d = unit_square();
        let mut errs = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let u = solve_forward(&d, &saddle_flux(), &RobinCoefficient::zero(), h).unwrap();
            let err = u
                .mesh
                .nodes
                .iter()
                .zip(&u.values)
                .map(|(p, v)| (v - (p.x * p.x - p.y * p.y)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
            assert!(u.total_flux().abs() < 1e-8);
        }
        for (e, h) in errs.iter().zip([1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]) {
            assert!(*e <= 5.0 * h * h, "{errs:?}");
        }
    }

    #[test]
    fn antisymmetric_flux_is_compatible() {
        let d = unit_square();
        let piece = |from: f64, to: f64, v: f64| FluxPiece {
            from,
            to,
            start_value: v,
            end_value: v,
        };
        // top edge runs from (1,1) at s = 2 to (0,1) at s = 3
        let g = NeumannFlux::new(vec![piece(2.0, 2.5, -1.0), piece(2.5, 3.0, 1.0)], 0.0, f64::INFINITY, 1.0).unwrap();
        let u = solve_forward(&d, &g, &RobinCoefficient::zero(), 1.0 / 16.0).unwrap();
        let mean: f64 = {
            let m = &u.mesh;
            (0..m.triangles.len())
                .map(|e| m.area(e) * m.triangles[e].iter().map(|&n| u.values[n]).sum::<f64>() / 3.0)
                .sum()
        };
        assert!(mean.abs() < 1e-10);
        // odd under x ↦ 1 − x up to the asymmetry of the diagonal splitting
        let a = u.value_at(&Vec2::new(0.25, 0.75)).unwrap();
        let b = u.value_at(&Vec2::new(0.75, 0.75)).unwrap();
        assert!(a > 0.01 && (a + b).abs() < 5.0 / 256.0, "{a} {b}");
    }

    #[test]
    fn incompatible_pure_neumann_is_rejected() {
        let d = unit_square();
        let r = solve_forward(&d, &top_unit_flux(), &RobinCoefficient::zero(), 0.125);
        assert!(matches!(r, Err(Error::IncompatibleFlux { .. })));
    }

    #[test]
    fn energy_identity() {
        let d = unit_square();
        let mesh = square_mesh(1.0 / 16.0);
        let gamma = RobinCoefficient::piecewise_linear(vec![(0.0, 0.2), (1.0, 0.6)], 1.0).unwrap();
        let g = NeumannFlux::new(
            vec![FluxPiece {
                from: 2.0,
                to: 3.0,
                start_value: 0.0,
                end_value: 1.0,
            }],
            0.0,
            f64::INFINITY,
            1.0,
        )
        .unwrap();
        let u = solve_forward_on(&mesh, &d, &g, &gamma).unwrap();
        let samples = g.sample(&mesh, &d);
        let robin = gamma.edge_values(&mesh, &d);
        let t = u.trace();
        let nb = mesh.n_boundary();
        let mut work = 0.0;
        let mut robin_term = 0.0;
        for k in 0..nb {
            let l = mesh.edge_length(k);
            for (q, (s, w)) in crate::quadrature::GAUSS3.mapped(0.0, 1.0).enumerate() {
                let uv = t[k] * (1.0 - s) + t[(k + 1) % nb] * s;
                let kv = robin[k][0] * (1.0 - s) + robin[k][1] * s;
                work += samples[k][q] * uv * w * l;
                robin_term += kv * uv * uv * w * l;
            }
        }
        let lhs = u.dirichlet_energy() + robin_term;
        assert!(((lhs - work) / work).abs() < 1e-8, "{lhs} vs {work}");
    }

    #[test]
    fn maximum_principle() {
        let d = unit_square();
        let u = solve_forward(&d, &top_unit_flux(), &RobinCoefficient::constant(0.5, 0.5), 1.0 / 16.0).unwrap();
        let min_all = u.values.iter().copied().fold(f64::INFINITY, f64::min);
        let min_b = u.trace().into_iter().fold(f64::INFINITY, f64::min);
        assert!((min_all - min_b).abs() < 1e-12);
        assert!(min_all > 0.0);
    }

    #[test]
    fn boundary_h1_norms() {
        let mesh = square_mesh(1.0 / 16.0);
        let one = DiscreteField::interpolate(mesh.clone(), |_| 1.0).unwrap();
        assert!((one.boundary_h1_norm() - 2.0).abs() < 1e-12);
        let lin = DiscreteField::interpolate(mesh.clone(), |p| p.y + 2.0).unwrap();
        // edges: 4 (bottom) + 9 (top) + 2·19/3 (sides), plus |∇_T u|² = 1 on the sides;
        // the P1 trace is exact for a linear field
        let exact = (83.0f64 / 3.0).sqrt();
        assert!((lin.boundary_h1_norm() - exact).abs() < 1e-12, "{}", lin.boundary_h1_norm());
        let coarse = DiscreteField::interpolate(square_mesh(1.0 / 8.0), |p| p.y + 2.0).unwrap();
        assert!((coarse.boundary_h1_norm() - lin.boundary_h1_norm()).abs() < 1.0 / 8.0);
    }

    #[test]
    fn normal_derivative_converges() {
        let d = unit_square();
        let mut errs = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let u = solve_forward(&d, &saddle_flux(), &RobinCoefficient::zero(), h).unwrap();
            let m = &u.mesh;
            let mut err: f64 = 0.0;
            for k in 0..m.n_boundary() {
                let p = m.nodes[m.boundary[k]];
                // skip the corners where ∂u/∂ν jumps
                let corner = (p.x == 0.0 || p.x == 1.0) && (p.y == 0.0 || p.y == 1.0);
                if corner {
                    continue;
                }
                let nu = m.edge_normal(k);
                let exact = 2.0 * p.x * nu.x - 2.0 * p.y * nu.y;
                let along = if p.y == 0.0 || p.y == 1.0 { p.x.min(1.0 - p.x) } else { p.y.min(1.0 - p.y) };
                if along >= 0.25 {
                    err = err.max((u.normal_derivative[k] - exact).abs());
                }
            }
            errs.push(err);
        }
        assert!(errs[2] < errs[0] / 2.0 && errs[2] < 0.05, "{errs:?}");
    }

    #[test]
    fn auxiliary_flux_balance() {
        let d = unit_square();
        let mesh = square_mesh(1.0 / 16.0);
        let gamma = RobinCoefficient::constant(0.5, 0.5);
        let u = solve_forward_on(&mesh, &d, &top_unit_flux(), &gamma).unwrap();
        let gu: Vec<f64> = gamma.nodal(&mesh, &d).iter().zip(u.trace()).map(|(g, t)| g * t).collect();
        match solve_auxiliary(&mesh, &d, &gu, Normalization::ZeroMean) {
            Err(Error::IncompatibleFlux { imbalance }) => assert!((imbalance - 2.0).abs() < 1e-9, "{imbalance}"),
            other => panic!("expected imbalance, got {other:?}"),
        }
        // γ ≡ 0: flux 1 on Γ_A alone
        let zero = vec![0.0; mesh.n_boundary()];
        assert!(matches!(
            solve_auxiliary(&mesh, &d, &zero, Normalization::ZeroMean),
            Err(Error::IncompatibleFlux { .. })
        ));
    }

    #[test]
    fn auxiliary_manufactured() {
        let d = unit_square();
        let mesh = square_mesh(1.0 / 16.0);
        let accessible = sample_edges(&mesh, 4.0, |_, nu, _| nu.y);
        let gu: Vec<f64> = vec![1.0; mesh.n_boundary()];
        let v = solve_auxiliary_with(&mesh, &d, &accessible, &gu, Normalization::BoundaryMean(2.5)).unwrap();
        assert!(v.diagnostic.is_none());
        assert!((v.min_value - 2.0).abs() < 1e-8, "{}", v.min_value);
    }

    #[test]
    fn robin_auxiliary_gives_homogeneous_weighted_condition() {
        let d = unit_square();
        let mesh = square_mesh(1.0 / 32.0);
        let gamma = RobinCoefficient::constant(0.5, 0.5);
        let u = solve_forward_on(&mesh, &d, &top_unit_flux(), &gamma).unwrap();
        let v = solve_auxiliary_robin(&mesh, &d, &gamma).unwrap();
        assert!(v.min_value > 0.0);
        let q = quotient_field(&u, &v.field, 1e-6).unwrap();
        assert!(q.neumann_defect < 0.05, "{}", q.neumann_defect);
    }

    #[test]
    fn quotient_identities() {
        let d = unit_square();
        let mesh = square_mesh(1.0 / 16.0);
        let u = solve_forward_on(&mesh, &d, &top_unit_flux(), &RobinCoefficient::constant(0.5, 0.5)).unwrap();
        let z = quotient_field(&u, &u, 1e-6).unwrap();
        assert!(z.z.values.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        assert!(z.weighted_residual < 1e-14);
        let one = DiscreteField::interpolate(mesh.clone(), |_| 1.0).unwrap();
        let z = quotient_field(&u, &one, 1e-6).unwrap();
        for (p, v) in mesh.nodes.iter().zip(&z.z.values) {
            assert!((v - (p.y + 2.0)).abs() < 1e-8);
        }
        let zero = DiscreteField::interpolate(mesh, |p| p.x - 0.5).unwrap();
        assert!(matches!(quotient_field(&u, &zero, 1e-3), Err(Error::DivisionUnsafe { .. })));
    }

    #[test]
    fn quotient_residual_decreases_under_refinement() {
        let mut res = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let mesh = square_mesh(h);
            let u = DiscreteField::interpolate(mesh.clone(), |p| p.x * p.x - p.y * p.y + 3.0).unwrap();
            let v = DiscreteField::interpolate(mesh, |p| p.x + 2.0).unwrap();
            res.push(quotient_field(&u, &v, 1e-6).unwrap().weighted_residual);
        }
        assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
    }

    #[test]
    fn field_csv_exports() {
        let mesh = square_mesh(0.5);
        let u = DiscreteField::interpolate(mesh, |p| p.x).unwrap();
        let mut nodes = Vec::new();
        u.write_nodes_csv(&mut nodes).unwrap();
        let text = String::from_utf8(nodes).unwrap();
        assert!(text.starts_with("id,x,y,value\n"));
        assert_eq!(text.lines().count(), 10);
        let mut b = Vec::new();
        u.write_boundary_csv(&mut b).unwrap();
        let text = String::from_utf8(b).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(1).unwrap().contains(",I,"));
        let _ = Side::A;
    }

    #[test]
    fn harmonic_residual_separates_fields() {
        let d = unit_square();
        let u = solve_forward(&d, &top_unit_flux(), &RobinCoefficient::constant(0.5, 0.5), 1.0 / 16.0).unwrap();
        assert!(u.harmonic_residual() < 1e-8);
        let bump = DiscreteField::interpolate(u.mesh.clone(), |p| p.x * p.x + p.y * p.y).unwrap();
        assert!(bump.harmonic_residual() > 1e-2);
    }
}
