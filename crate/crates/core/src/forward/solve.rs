use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Side};
use crate::mesh::{MeshKind, TriMesh};
use crate::quadrature::GAUSS3;
use crate::sparse::{self, Csr, Triplets};

use super::data::{EdgeSamples, NeumannFlux, RobinCoefficient};
use super::field::{DiscreteField, SolveReport};

/// Relative residual required from the linear solver.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Fixes the additive constant of pure Neumann solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `∫_Ω u = 0`.
    ZeroMean,
    /// Arclength mean of the trace over ∂Ω equals the given value.
    BoundaryMean(f64),
}

/// The general boundary problem behind every solve: `Δu = 0` in Ω and
/// `∂u/∂ν + κ u = q` on each loop edge.
#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    /// `q` at the Gauss points of each edge.
    pub flux: EdgeSamples,
    /// `κ` at the two ends of each edge, linear in between.
    pub robin: Vec<[f64; 2]>,
}

impl BoundaryProblem {
    pub fn neumann(flux: EdgeSamples) -> Self {
        let n = flux.len();
        BoundaryProblem {
            flux,
            robin: vec![[0.0; 2]; n],
        }
    }

    fn has_robin(&self) -> bool {
        self.robin.iter().any(|r| r[0] != 0.0 || r[1] != 0.0)
    }
}

/// P1 stiffness matrix.
pub(crate) fn stiffness(mesh: &TriMesh) -> Csr {
    let mut t = Triplets::new(mesh.n_nodes());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let g = super::field::shape_gradients(mesh, e);
        let area = mesh.area(e);
        for i in 0..3 {
            for j in 0..3 {
                t.add(tri[i], tri[j], area * g[i].dot(&g[j]));
            }
        }
    }
    t.into_csr()
}

/// P1 mass matrix of the boundary loop, indexed by loop position.
pub(crate) fn boundary_mass(mesh: &TriMesh) -> Csr {
    let n = mesh.n_boundary();
    let mut t = Triplets::new(n);
    for k in 0..n {
        let l = mesh.edge_length(k);
        let j = (k + 1) % n;
        t.add(k, k, l / 3.0);
        t.add(j, j, l / 3.0);
        t.add(k, j, l / 6.0);
        t.add(j, k, l / 6.0);
    }
    t.into_csr()
}

/// Recovers `∂u/∂ν` at loop nodes from `∫ ∂u/∂ν φ_i = ∫_Ω ∇u·∇φ_i`.
pub(crate) fn recover_normal_derivative(mesh: &TriMesh, k: &Csr, values: &[f64]) -> Result<Vec<f64>> {
    let ku = k.apply(values);
    let rhs: Vec<f64> = mesh.boundary.iter().map(|&n| ku[n]).collect();
    let m = boundary_mass(mesh);
    let (lambda, _) = sparse::pcg(&m, &rhs, 1e-13, false)?;
    Ok(lambda)
}

/// Solves the general boundary problem on `mesh`.
pub fn solve_boundary_problem(
    mesh: &Arc<TriMesh>,
    problem: &BoundaryProblem,
    normalization: Normalization,
) -> Result<DiscreteField> {
    let nb = mesh.n_boundary();
    if problem.flux.len() != nb || problem.robin.len() != nb {
        return Err(Error::InvalidInput(
            "boundary data do not match the mesh boundary".into(),
        ));
    }
    if problem.robin.iter().flatten().any(|&k| k < 0.0) {
        return Err(Error::Configuration("negative Robin coefficient".into()));
    }
    let stiff = stiffness(mesh);
    let mut trip = Triplets::new(mesh.n_nodes());
    for (i, row) in (0..stiff.n).map(|i| (i, stiff.row_ptr[i]..stiff.row_ptr[i + 1])) {
        for p in row {
            trip.add(i, stiff.cols[p], stiff.vals[p]);
        }
    }
    let mut rhs = vec![0.0; mesh.n_nodes()];
    let mut total_flux = 0.0;
    let mut total_abs = 0.0;
    for k in 0..nb {
        let (a, b) = mesh.edge(k);
        let l = mesh.edge_length(k);
        let kap = problem.robin[k];
        for (q, (t, w)) in GAUSS3.mapped(0.0, 1.0).enumerate() {
            let phi = [1.0 - t, t];
            let wl = w * l;
            let g = problem.flux[k][q];
            total_flux += g * wl;
            total_abs += g.abs() * wl;
            rhs[a] += g * phi[0] * wl;
            rhs[b] += g * phi[1] * wl;
            let kv = kap[0] * phi[0] + kap[1] * phi[1];
            if kv != 0.0 {
                let nodes = [a, b];
                for i in 0..2 {
                    for j in 0..2 {
                        trip.add(nodes[i], nodes[j], kv * phi[i] * phi[j] * wl);
                    }
                }
            }
        }
    }
    let singular = !problem.has_robin();
    if singular && total_flux.abs() > 1e-10 * total_abs.max(1e-300) && total_flux.abs() > 1e-14 {
        return Err(Error::IncompatibleFlux {
            imbalance: total_flux,
        });
    }
    let a = trip.into_csr();
    let (mut values, report) = sparse::pcg(&a, &rhs, SOLVER_TOLERANCE, singular)?;
    if singular {
        let shift = match normalization {
            Normalization::ZeroMean => {
                let mut integral = 0.0;
                let mut area = 0.0;
                for (e, tri) in mesh.triangles.iter().enumerate() {
                    let ar = mesh.area(e);
                    integral += ar * tri.iter().map(|&n| values[n]).sum::<f64>() / 3.0;
                    area += ar;
                }
                integral / area
            }
            Normalization::BoundaryMean(c) => {
                let mut integral = 0.0;
                for k in 0..nb {
                    let (p, q) = mesh.edge(k);
                    integral += 0.5 * (values[p] + values[q]) * mesh.edge_length(k);
                }
                integral / mesh.perimeter() - c
            }
        };
        values.iter_mut().for_each(|v| *v -= shift);
    }
    let normal_derivative = recover_normal_derivative(mesh, &stiff, &values)?;
    Ok(DiscreteField::from_parts(
        mesh.clone(),
        values,
        normal_derivative,
        Some(SolveReport {
            iterations: report.iterations,
            relative_residual: report.relative_residual,
        }),
    ))
}

/// Solves problem (P) on a freshly generated mesh of size `h`.
pub fn solve_forward(
    domain: &Domain,
    g: &NeumannFlux,
    gamma: &RobinCoefficient,
    h: f64,
) -> Result<DiscreteField> {
    let mesh = Arc::new(TriMesh::generate(domain, h, MeshKind::Auto)?);
    solve_forward_on(&mesh, domain, g, gamma)
}

/// Solves problem (P) on a given mesh. With `γ ≡ 0` the data must be
/// compatible and the zero-mean solution is returned.
pub fn solve_forward_on(
    mesh: &Arc<TriMesh>,
    domain: &Domain,
    g: &NeumannFlux,
    gamma: &RobinCoefficient,
) -> Result<DiscreteField> {
    gamma.validate(domain)?;
    for w in g.admissibility(domain).warnings {
        log::warn!("flux outside the admissible class: {w}");
    }
    let problem = BoundaryProblem {
        flux: g.sample(mesh, domain),
        robin: gamma.edge_values(mesh, domain),
    };
    solve_boundary_problem(mesh, &problem, Normalization::ZeroMean)
}

/// Solution of the auxiliary problem with positivity diagnostics.
#[derive(Debug, Clone)]
pub struct AuxiliaryField {
    pub field: DiscreteField,
    pub min_value: f64,
    /// Present when `min v ≤ 0`, which violates the positivity used for the
    /// quotient `z = u/v`.
    pub diagnostic: Option<String>,
}

fn auxiliary_result(field: DiscreteField) -> AuxiliaryField {
    let min_value = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let diagnostic = (min_value <= 0.0).then(|| {
        format!("auxiliary solution is not positive (min v = {min_value:.6e})")
    });
    if let Some(d) = &diagnostic {
        log::warn!("{d}");
    }
    AuxiliaryField {
        field,
        min_value,
        diagnostic,
    }
}

/// Auxiliary problem as stated: `Δv = 0`, `∂v/∂ν = 1` on Γ_A and
/// `∂v/∂ν = −γu` on Γ_I, where `gamma_u_flux` holds `γu` per loop node.
///
/// This is a pure Neumann problem; it is solved only when
/// `|Γ_A| = ∫_{Γ_I} γu`, otherwise the imbalance is returned as an error.
pub fn solve_auxiliary(
    mesh: &Arc<TriMesh>,
    domain: &Domain,
    gamma_u_flux: &[f64],
    normalization: Normalization,
) -> Result<AuxiliaryField> {
    let ones = super::data::sample_edges(mesh, domain.length(), |_, _, _| 1.0);
    solve_auxiliary_with(mesh, domain, &ones, gamma_u_flux, normalization)
}

/// Auxiliary problem with a general accessible flux (`accessible` is read on
/// Γ_A edges only).
pub fn solve_auxiliary_with(
    mesh: &Arc<TriMesh>,
    _domain: &Domain,
    accessible: &EdgeSamples,
    gamma_u_flux: &[f64],
    normalization: Normalization,
) -> Result<AuxiliaryField> {
    let nb = mesh.n_boundary();
    if gamma_u_flux.len() != nb {
        return Err(Error::InvalidInput(
            "γu flux must have one value per boundary node".into(),
        ));
    }
    let flux: EdgeSamples = (0..nb)
        .map(|k| match mesh.edge_side[k] {
            Side::A => accessible[k],
            Side::I => {
                let ga = gamma_u_flux[k];
                let gb = gamma_u_flux[(k + 1) % nb];
                let mut out = [0.0; 3];
                for (q, (t, _)) in GAUSS3.mapped(0.0, 1.0).enumerate() {
                    out[q] = -(ga * (1.0 - t) + gb * t);
                }
                out
            }
        })
        .collect();
    let field = solve_boundary_problem(mesh, &BoundaryProblem::neumann(flux), normalization)?;
    Ok(auxiliary_result(field))
}

/// Robin form of the auxiliary problem: `∂v/∂ν = 1` on Γ_A and
/// `∂v/∂ν + γv = 0` on Γ_I. The quotient `z = u/v` then satisfies the
/// homogeneous weighted Neumann condition on Γ_I.
pub fn solve_auxiliary_robin(
    mesh: &Arc<TriMesh>,
    domain: &Domain,
    gamma: &RobinCoefficient,
) -> Result<AuxiliaryField> {
    let g = super::data::sample_edges(mesh, domain.length(), |_, _, _| 1.0);
    let flux: EdgeSamples = (0..mesh.n_boundary())
        .map(|k| if mesh.edge_side[k] == Side::A { g[k] } else { [0.0; 3] })
        .collect();
    let problem = BoundaryProblem {
        flux,
        robin: gamma.edge_values(mesh, domain),
    };
    let field = solve_boundary_problem(mesh, &problem, Normalization::ZeroMean)?;
    Ok(auxiliary_result(field))
}
