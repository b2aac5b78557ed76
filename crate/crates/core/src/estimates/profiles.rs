use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{fmt, DiscreteField};
use crate::geometry::{Domain, Vec2};
use crate::stats::line_fit;

use super::surface::{
    radius_grid, require_inaccessible_center, require_resolved, surface_l2_sq, surface_measure,
    surface_negative_power,
};

/// Rows `(r, lhs, rhs, ratio)` of a profile CSV.
pub(crate) fn write_profile_csv(w: impl Write, rows: impl Iterator<Item = [f64; 4]>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["r", "lhs", "rhs", "ratio"])?;
    for row in rows {
        wr.write_record(row.map(fmt))?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingProfile {
    pub center: Vec2,
    /// Decreasing radii `r_j`.
    pub radii: Vec<f64>,
    /// `∫_{Δ_{2r}} u²`.
    pub outer: Vec<f64>,
    /// `∫_{Δ_r} u²`.
    pub inner: Vec<f64>,
    pub ratios: Vec<f64>,
    pub k1_hat: f64,
}

impl DoublingProfile {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_profile_csv(
            w,
            (0..self.radii.len()).map(|j| [self.radii[j], self.outer[j], self.inner[j], self.ratios[j]]),
        )
    }
}

/// Surface doubling ratios `∫_{Δ_{2r}} u² / ∫_{Δ_r} u²` on a geometric grid.
pub fn doubling_profile(
    field: &DiscreteField,
    domain: &Domain,
    x0: &Vec2,
    r_min: f64,
    r_max: f64,
    n_radii: usize,
) -> Result<DoublingProfile> {
    let radii = radius_grid(r_min, r_max, n_radii)?;
    let c = require_inaccessible_center(domain, x0, 2.0 * r_max)?;
    require_resolved(field, &c, r_min)?;
    let outer: Vec<f64> = radii.iter().map(|&r| surface_l2_sq(field, &c, 2.0 * r)).collect();
    let inner: Vec<f64> = radii.iter().map(|&r| surface_l2_sq(field, &c, r)).collect();
    if outer.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("u vanishes on every surface ball".into()));
    }
    let ratios: Vec<f64> = outer
        .iter()
        .zip(&inner)
        .map(|(o, i)| if *i > 0.0 { o / i } else { f64::INFINITY })
        .collect();
    let k1_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(DoublingProfile {
        center: c,
        radii,
        outer,
        inner,
        ratios,
        k1_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VanishingModel {
    Polynomial,
    Exponential,
}

/// `ln ∫_{Δ_r} u² ≈ K ln r + c`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolynomialRate {
    pub exponent: f64,
    pub intercept: f64,
    /// Two standard errors of the exponent.
    pub band: f64,
    pub residual: f64,
}

/// `ln ∫_{Δ_r} u² ≈ c − K r^{−k}`, best `k` on a grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentialRate {
    pub k: f64,
    pub rate: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VanishingRateFit {
    pub center: Vec2,
    pub radii: Vec<f64>,
    pub integrals: Vec<f64>,
    pub polynomial: PolynomialRate,
    pub exponential: ExponentialRate,
    pub model: VanishingModel,
}

impl VanishingRateFit {
    /// `lhs` is the integral, `rhs` the polynomial model.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let p = self.polynomial;
        write_profile_csv(
            w,
            (0..self.radii.len()).map(|j| {
                let model = (p.intercept + p.exponent * self.radii[j].ln()).exp();
                [self.radii[j], self.integrals[j], model, self.integrals[j] / model]
            }),
        )
    }
}

/// Exponents `k` tried by the exponential model.
pub const EXPONENTIAL_K_GRID: [f64; 16] = [
    0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5, 3.75, 4.0,
];

/// Fits both vanishing models to `r ↦ ∫_{Δ_r(x0)} u²` and keeps the one
/// with the smaller residual.
pub fn vanishing_rate_fit(field: &DiscreteField, domain: &Domain, x0: &Vec2, radii: &[f64]) -> Result<VanishingRateFit> {
    if radii.len() < 3 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("vanishing fit needs at least three positive radii".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let c = require_inaccessible_center(domain, x0, r_max)?;
    require_resolved(field, &c, r_min)?;
    let integrals: Vec<f64> = radii.iter().map(|&r| surface_l2_sq(field, &c, r)).collect();
    let scale = field.max_abs().powi(2);
    let floor = 1e-24 * scale * r_min;
    let kept: Vec<usize> = (0..radii.len()).filter(|&j| integrals[j] > floor).collect();
    if kept.len() < 3 {
        return Err(Error::Degenerate("surface integrals fall below the quadrature floor; u ≈ 0 near x0".into()));
    }
    let ln_i: Vec<f64> = kept.iter().map(|&j| integrals[j].ln()).collect();
    let ln_r: Vec<f64> = kept.iter().map(|&j| radii[j].ln()).collect();
    let pf = line_fit(&ln_r, &ln_i).ok_or_else(|| Error::Degenerate("radii are not distinct".into()))?;
    let polynomial = PolynomialRate {
        exponent: pf.slope,
        intercept: pf.intercept,
        band: 2.0 * pf.slope_stderr,
        residual: pf.residual,
    };
    let exponential = EXPONENTIAL_K_GRID
        .iter()
        .filter_map(|&k| {
            let x: Vec<f64> = kept.iter().map(|&j| radii[j].powf(-k)).collect();
            line_fit(&x, &ln_i).map(|f| ExponentialRate {
                k,
                rate: -f.slope,
                intercept: f.intercept,
                residual: f.residual,
            })
        })
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .ok_or_else(|| Error::Degenerate("exponential model could not be fitted".into()))?;
    let model = if polynomial.residual <= exponential.residual {
        VanishingModel::Polynomial
    } else {
        VanishingModel::Exponential
    };
    Ok(VanishingRateFit {
        center: c,
        radii: radii.to_vec(),
        integrals,
        polynomial,
        exponential,
        model,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MuckenhouptProfile {
    pub p: f64,
    pub center: Vec2,
    pub radii: Vec<f64>,
    /// `|Δ_r|^{−1} ∫ u²`.
    pub mean_square: Vec<f64>,
    /// `(|Δ_r|^{−1} ∫ |u|^{−2/(p−1)})^{p−1}`, `None` where it diverges.
    pub negative_mean: Vec<Option<f64>>,
    /// Product per radius, `None` where it diverges.
    pub products: Vec<Option<f64>>,
    /// Supremum over the radii with a finite product.
    pub a_hat: f64,
    pub divergent: bool,
}

impl MuckenhouptProfile {
    /// Divergent radii are written with infinite `rhs` and `ratio`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_profile_csv(
            w,
            (0..self.radii.len()).map(|j| {
                [
                    self.radii[j],
                    self.mean_square[j],
                    self.negative_mean[j].unwrap_or(f64::INFINITY),
                    self.products[j].unwrap_or(f64::INFINITY),
                ]
            }),
        )
    }
}

/// The `A_p` product of `u²` on each surface ball.
pub fn muckenhoupt_profile(
    field: &DiscreteField,
    domain: &Domain,
    x0: &Vec2,
    p: f64,
    radii: &[f64],
) -> Result<MuckenhouptProfile> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("exponent p = {p} must exceed 1")));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let c = require_inaccessible_center(domain, x0, r_max)?;
    require_resolved(field, &c, r_min)?;
    if surface_l2_sq(field, &c, r_min) == 0.0 {
        return Err(Error::Degenerate("u² vanishes on the smallest ball".into()));
    }
    let beta = 2.0 / (p - 1.0);
    let mut mean_square = Vec::with_capacity(radii.len());
    let mut negative_mean = Vec::with_capacity(radii.len());
    let mut products = Vec::with_capacity(radii.len());
    for &r in radii {
        let m = surface_measure(field, &c, r);
        let ms = surface_l2_sq(field, &c, r) / m;
        let neg = surface_negative_power(field, &c, r, beta).value().map(|v| (v / m).powf(p - 1.0));
        mean_square.push(ms);
        negative_mean.push(neg);
        products.push(neg.map(|n| ms * n));
    }
    let divergent = products.iter().any(Option::is_none);
    let a_hat = products.iter().flatten().copied().fold(0.0, f64::max);
    Ok(MuckenhouptProfile {
        p,
        center: c,
        radii: radii.to_vec(),
        mean_square,
        negative_mean,
        products,
        a_hat,
        divergent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeDoublingProfile {
    pub center: Vec2,
    pub radii: Vec<f64>,
    /// `∫_{Γ_{2r}} z²`.
    pub outer: Vec<f64>,
    /// `∫_{Γ_r} z²`.
    pub inner: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Radii whose solid ball selected fewer elements than it should.
    pub under_resolved: Vec<bool>,
}

impl VolumeDoublingProfile {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_profile_csv(
            w,
            (0..self.radii.len()).map(|j| [self.radii[j], self.outer[j], self.inner[j], self.ratios[j]]),
        )
    }
}

/// Solid doubling ratios `∫_{Γ_{2r}(x0)} z² / ∫_{Γ_r(x0)} z²`, meant for
/// the quotient field `z = u/v`.
pub fn volume_doubling_profile(z: &DiscreteField, x0: &Vec2, radii: &[f64]) -> Result<VolumeDoublingProfile> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    let mut under_resolved = Vec::new();
    for &r in radii {
        let big = z.mesh.mask_solid_ball(x0, 2.0 * r)?;
        let small = z.mesh.mask_solid_ball(x0, r)?;
        outer.push(z.l2_norm_sq_on(&big.elements));
        inner.push(z.l2_norm_sq_on(&small.elements));
        under_resolved.push(small.under_resolved);
    }
    let ratios: Vec<f64> = outer
        .iter()
        .zip(&inner)
        .map(|(o, i)| if *i > 0.0 { o / i } else { f64::INFINITY })
        .collect();
    let max_ratio = ratios
        .iter()
        .zip(&under_resolved)
        .filter(|(_, u)| !**u)
        .map(|(r, _)| *r)
        .fold(0.0, f64::max);
    Ok(VolumeDoublingProfile {
        center: *x0,
        radii: radii.to_vec(),
        outer,
        inner,
        ratios,
        max_ratio,
        under_resolved,
    })
}
