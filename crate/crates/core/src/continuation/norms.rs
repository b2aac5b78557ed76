use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;

use super::sampling::ArcSampling;
use super::solve::ContinuationResult;

/// Order of the negative Sobolev norm used for flux comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeOrder {
    #[serde(rename = "-1/2")]
    Half,
    #[serde(rename = "-1")]
    One,
}

impl NegativeOrder {
    pub fn value(self) -> f64 {
        match self {
            NegativeOrder::Half => -0.5,
            NegativeOrder::One => -1.0,
        }
    }
}

/// Spectral decomposition of the discrete Dirichlet Laplacian on the samples
/// of an arc, padded with a vanishing node beyond each end.
#[derive(Debug, Clone)]
pub struct ArcSpectrum {
    /// Eigenvalues of the generalized problem `S e = μ M e`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal eigenvectors, one per column.
    pub eigenvectors: DMatrix<f64>,
    mass: Vec<f64>,
}

impl ArcSpectrum {
    /// `offsets` must be strictly increasing positions along an arc of
    /// length `span`.
    pub fn new(offsets: &[f64], span: f64) -> Result<Self> {
        let n = offsets.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty sampling".into()));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sample offsets must increase strictly".into()));
        }
        let tol = 1e-12 * span.max(1.0);
        let gap_lo = offsets.get(1).map_or(span, |o| o - offsets[0]);
        let gap_hi = if n > 1 { offsets[n - 1] - offsets[n - 2] } else { span };
        // vanishing ghosts at the arc ends, mirrored outward when a sample
        // already sits on an end
        let lo = if offsets[0] > tol { 0.0 } else { offsets[0] - gap_lo };
        let hi = if offsets[n - 1] < span - tol { span } else { offsets[n - 1] + gap_hi };
        let mut x = Vec::with_capacity(n + 2);
        x.push(lo);
        x.extend_from_slice(offsets);
        x.push(hi);
        let mut s = DMatrix::<f64>::zeros(n, n);
        let mut mass = vec![0.0; n];
        for e in 0..=n {
            let h = x[e + 1] - x[e];
            // element between padded nodes e and e+1, i.e. unknowns e−1 and e
            let (a, b) = (e.checked_sub(1), if e < n { Some(e) } else { None });
            for (i, vi) in [(a, 1.0), (b, -1.0)] {
                let Some(i) = i else { continue };
                mass[i] += 0.5 * h;
                for (j, vj) in [(a, 1.0), (b, -1.0)] {
                    if let Some(j) = j {
                        s[(i, j)] += vi * vj / h;
                    }
                }
            }
        }
        let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let b = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * s[(i, j)] * inv_sqrt[j]);
        let eig = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, c| inv_sqrt[i] * eig.eigenvectors[(i, order[c])]);
        Ok(ArcSpectrum {
            eigenvalues,
            eigenvectors,
            mass,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Coefficients of `f` in the eigenbasis.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|c| (0..n).map(|i| self.eigenvectors[(i, c)] * self.mass[i] * f[i]).sum())
            .collect()
    }

    /// `(Σ (1 + μ_k)^s c_k²)^{1/2}`.
    pub fn norm(&self, f: &[f64], s: f64) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::SamplingMismatch(format!(
                "{} values for {} samples",
                f.len(),
                self.len()
            )));
        }
        let c = self.coefficients(f);
        Ok(c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, mu)| (1.0 + mu).powf(s) * c * c)
            .sum::<f64>()
            .sqrt())
    }
}

/// Discrete `H^s_00` norm of samples on an arc, `s ∈ [−1, 1]`.
pub fn sobolev_norm_00(domain: &Domain, sampling: &ArcSampling, values: &[f64], s: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::InvalidInput(format!("order {s} outside [−1, 1]")));
    }
    let span = domain.arc(sampling.side).span;
    ArcSpectrum::new(&sampling.offsets(domain), span)?.norm(values, s)
}

/// Negative-order norm of the difference of two Γ_I fluxes.
pub fn negative_norm_flux_error(
    a: &ContinuationResult,
    b: &ContinuationResult,
    domain: &Domain,
    order: NegativeOrder,
) -> Result<f64> {
    let tol = 1e-9 * domain.length();
    if !a.sampling.matches(&b.sampling, tol) || a.flux.len() != b.flux.len() {
        return Err(Error::SamplingMismatch(format!(
            "Γ_I samplings differ ({} vs {} samples)",
            a.sampling.len(),
            b.sampling.len()
        )));
    }
    let d: Vec<f64> = a.flux.iter().zip(&b.flux).map(|(x, y)| x - y).collect();
    sobolev_norm_00(domain, &a.sampling, &d, order.value())
}
