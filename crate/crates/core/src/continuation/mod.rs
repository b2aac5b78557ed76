//! Regularized harmonic continuation of Cauchy data from Γ_A to Γ_I and the
//! discrete negative-order norms used to compare fluxes on Γ_I.

mod basis;
mod norms;
mod sampling;
mod solve;

pub use basis::HarmonicBasis;
pub use norms::{negative_norm_flux_error, sobolev_norm_00, ArcSpectrum, NegativeOrder};
pub use sampling::{ArcSampling, CauchyData};
pub use solve::{
    continue_cauchy, ContinuationResult, Regularization, CLEAN_DATA_LAMBDA, CONDITION_LIMIT, FLOOR_FACTOR,
    LAMBDA_STEP,
};
