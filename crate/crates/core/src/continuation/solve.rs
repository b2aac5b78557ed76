use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{fmt, DiscreteField};
use crate::geometry::{Domain, Side};

use super::basis::HarmonicBasis;
use super::sampling::{ArcSampling, CauchyData};

/// Smallest λ used for clean data under the discrepancy rule.
pub const CLEAN_DATA_LAMBDA: f64 = 1e-8;
/// Largest accepted condition number of the regularized normal system.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Factor applied to λ while the condition limit is exceeded.
pub const LAMBDA_STEP: f64 = 10.0;
/// The discrepancy target is never below this multiple of the fit floor.
pub const FLOOR_FACTOR: f64 = 10.0;

/// How the Tikhonov weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Regularization {
    Fixed { lambda: f64 },
    /// Morozov's principle: the data misfit should match the noise level.
    Discrepancy,
}

/// Reconstructed traces on Γ_I.
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub sampling: ArcSampling,
    pub trace: Vec<f64>,
    pub flux: Vec<f64>,
    pub tangential_derivative: Vec<f64>,
    pub lambda: f64,
    /// Weighted `L²(Γ_A)` misfit of Dirichlet and Neumann data together.
    pub discrepancy: f64,
    /// Misfit at the smallest λ reachable; the model floor of the basis.
    pub floor: f64,
    pub condition: f64,
    pub coefficients: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ContinuationResult {
    /// Γ_I traces of a field at its mesh nodes, with nodal arclength
    /// derivatives (one-sided at the ends).
    pub fn from_field(field: &DiscreteField, domain: &Domain) -> Self {
        let sampling = ArcSampling::nodes_on_mesh(field, domain, Side::I);
        let chain = field.mesh.side_chain(Side::I);
        let trace: Vec<f64> = chain.iter().map(|&k| field.values[field.mesh.boundary[k]]).collect();
        let flux: Vec<f64> = chain.iter().map(|&k| field.normal_derivative[k]).collect();
        let offsets = sampling.offsets(domain);
        let tangential_derivative = nodal_derivative(&offsets, &trace);
        ContinuationResult {
            sampling,
            trace,
            flux,
            tangential_derivative,
            lambda: 0.0,
            discrepancy: 0.0,
            floor: 0.0,
            condition: 1.0,
            coefficients: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// CSV with columns `s,trace,flux,tangential_derivative`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "trace", "flux", "tangential_derivative"])?;
        for i in 0..self.sampling.len() {
            wr.write_record([
                fmt(self.sampling.params[i]),
                fmt(self.trace[i]),
                fmt(self.flux[i]),
                fmt(self.tangential_derivative[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`ContinuationResult::write_csv`]; geometry
    /// and trapezoid weights are rebuilt from the domain.
    pub fn read_csv(r: impl std::io::Read, domain: &Domain) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::Parse("continuation CSV needs 4 columns".into()));
            }
            let mut row = [0.0; 4];
            for (slot, v) in row.iter_mut().zip(rec.iter()) {
                *slot = v.trim().parse().map_err(|_| Error::Parse(format!("bad number '{v}'")))?;
            }
            rows.push(row);
        }
        let n = rows.len();
        if n < 2 {
            return Err(Error::Parse("continuation CSV needs at least two rows".into()));
        }
        let params: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut sampling = ArcSampling {
            side: Side::I,
            params: params.clone(),
            points: params.iter().map(|&s| domain.curve.point_at(s)).collect(),
            normals: params.iter().map(|&s| domain.curve.normal_at(s)).collect(),
            weights: vec![0.0; n],
        };
        let off = sampling.offsets(domain);
        for i in 0..n - 1 {
            let h = off[i + 1] - off[i];
            sampling.weights[i] += 0.5 * h;
            sampling.weights[i + 1] += 0.5 * h;
        }
        Ok(ContinuationResult {
            sampling,
            trace: rows.iter().map(|r| r[1]).collect(),
            flux: rows.iter().map(|r| r[2]).collect(),
            tangential_derivative: rows.iter().map(|r| r[3]).collect(),
            lambda: 0.0,
            discrepancy: 0.0,
            floor: 0.0,
            condition: 1.0,
            coefficients: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Nodal derivative of samples along increasing offsets.
pub(crate) fn nodal_derivative(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                0.0
            } else if i == 0 {
                (f[1] - f[0]) / (t[1] - t[0])
            } else if i + 1 == n {
                (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                // second-order formula on non-uniform spacing
                let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                (h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i]) / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

struct Svd {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v_t: DMatrix<f64>,
    b: DVector<f64>,
}

impl Svd {
    fn coefficients(&self, lambda: f64) -> DVector<f64> {
        let utb = self.u.transpose() * &self.b;
        let filt = DVector::from_iterator(
            self.s.len(),
            self.s.iter().zip(utb.iter()).map(|(s, c)| s * c / (s * s + lambda)),
        );
        self.v_t.transpose() * filt
    }

    /// Residual norm including the part of `b` outside the range of `A`.
    fn misfit(&self, lambda: f64) -> f64 {
        let utb = self.u.transpose() * &self.b;
        let in_range: f64 = utb.iter().map(|c| c * c).sum();
        let outside = (self.b.norm_squared() - in_range).max(0.0);
        let inside: f64 = self
            .s
            .iter()
            .zip(utb.iter())
            .map(|(s, c)| {
                let f = lambda / (s * s + lambda);
                f * f * c * c
            })
            .sum();
        (outside + inside).sqrt()
    }

    fn condition(&self, lambda: f64) -> f64 {
        let smax = self.s.iter().fold(0.0f64, |m, v| m.max(*v));
        let smin = self.s.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        (smax * smax + lambda) / (smin * smin + lambda)
    }
}

/// Regularized harmonic-polynomial continuation of Cauchy data from Γ_A,
/// evaluated on `target`. `degree` is the largest polynomial degree.
pub fn continue_cauchy(
    domain: &Domain,
    data: &CauchyData,
    degree: usize,
    regularization: Regularization,
    target: &ArcSampling,
) -> Result<ContinuationResult> {
    let basis = HarmonicBasis::for_domain(domain, degree);
    let nb = basis.len();
    if nb < 4 {
        return Err(Error::InvalidInput(format!("basis size {nb} is below 4")));
    }
    let m = data.sampling.len();
    if data.dirichlet.len() != m || data.neumann.len() != m {
        return Err(Error::SamplingMismatch("Cauchy data lengths differ from the sampling".into()));
    }
    if 2 * m < nb {
        return Err(Error::InvalidInput("fewer data than basis functions".into()));
    }
    let mut a = DMatrix::<f64>::zeros(2 * m, nb);
    let mut b = DVector::<f64>::zeros(2 * m);
    for i in 0..m {
        let sw = data.sampling.weights[i].sqrt();
        let (val, grad) = basis.eval(&data.sampling.points[i]);
        let nu = data.sampling.normals[i];
        for j in 0..nb {
            a[(i, j)] = sw * val[j];
            a[(m + i, j)] = sw * grad[j].dot(&nu);
        }
        b[i] = sw * data.dirichlet[i];
        b[m + i] = sw * data.neumann[i];
    }
    let svd = a.svd(true, true);
    let svd = Svd {
        u: svd.u.ok_or_else(|| Error::Degenerate("SVD failed".into()))?,
        s: svd.singular_values,
        v_t: svd.v_t.ok_or_else(|| Error::Degenerate("SVD failed".into()))?,
        b,
    };
    let smax = svd.s.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::ContinuationFailed {
            reason: "data matrix vanishes".into(),
            condition: f64::INFINITY,
            lambda: 0.0,
        });
    }
    let lam_min = 1e-16 * smax * smax;
    let lam_max = 1e4 * smax * smax;
    let floor = svd.misfit(lam_min);
    let mut warnings = Vec::new();
    let mut lambda = match regularization {
        Regularization::Fixed { lambda } => {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidInput(format!("λ = {lambda} must be nonnegative")));
            }
            lambda
        }
        Regularization::Discrepancy => {
            let target_misfit = data.noise_level.max(FLOOR_FACTOR * floor);
            let morozov = if svd.misfit(lam_max) <= target_misfit {
                warnings.push("discrepancy target above the misfit of the largest λ".into());
                lam_max
            } else {
                let (mut lo, mut hi) = (lam_min.ln(), lam_max.ln());
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if svd.misfit(mid.exp()) > target_misfit {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-10 {
                        break;
                    }
                }
                lo.exp()
            };
            if data.noise_level == 0.0 { morozov.max(CLEAN_DATA_LAMBDA) } else { morozov }
        }
    };
    let mut condition = svd.condition(lambda);
    while condition > CONDITION_LIMIT {
        let next = if lambda > 0.0 { lambda * LAMBDA_STEP } else { lam_min };
        warnings.push(format!(
            "condition number {condition:.3e} above {CONDITION_LIMIT:.0e}; λ raised from {lambda:.3e} to {next:.3e}"
        ));
        log::warn!("{}", warnings.last().unwrap());
        lambda = next;
        condition = svd.condition(lambda);
        if lambda > lam_max {
            return Err(Error::ContinuationFailed {
                reason: "conditioning schedule exhausted".into(),
                condition,
                lambda,
            });
        }
    }
    let c = svd.coefficients(lambda);
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::ContinuationFailed {
            reason: "non-finite coefficients".into(),
            condition,
            lambda,
        });
    }
    let discrepancy = svd.misfit(lambda);
    let n = target.len();
    let mut trace = Vec::with_capacity(n);
    let mut flux = Vec::with_capacity(n);
    let mut tangential = Vec::with_capacity(n);
    for i in 0..n {
        let (val, grad) = basis.eval(&target.points[i]);
        let nu = target.normals[i];
        let tau = crate::geometry::Vec2::new(-nu.y, nu.x);
        let mut u = 0.0;
        let mut du_n = 0.0;
        let mut du_t = 0.0;
        for j in 0..nb {
            u += c[j] * val[j];
            du_n += c[j] * grad[j].dot(&nu);
            du_t += c[j] * grad[j].dot(&tau);
        }
        trace.push(u);
        flux.push(du_n);
        tangential.push(du_t);
    }
    Ok(ContinuationResult {
        sampling: target.clone(),
        trace,
        flux,
        tangential_derivative: tangential,
        lambda,
        discrepancy,
        floor,
        condition,
        coefficients: c.iter().copied().collect(),
        warnings,
    })
}
