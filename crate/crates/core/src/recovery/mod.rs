//! Quotient reconstruction of the Robin coefficient, the weighted
//! interpolation bounds and the Muckenhoupt `L^β` certificate.

mod bounds;
mod certificate;
mod gamma;

pub use bounds::{
    loglog_interpolation_bound, loglog_tradeoff, weighted_interpolation_bound, weighted_tradeoff, InterpolationBound,
    LoglogBound,
};
pub use certificate::{recover_gamma_lbeta, LbetaCertificate};
pub use gamma::{recover_gamma, ClampEvent, FloorMode, GammaError, GammaEstimate, NormMode, RecoveryConfig};
