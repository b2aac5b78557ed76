use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({x}, {y}) lies {distance:e} from the boundary (tolerance {tolerance:e})")]
    OffBoundary {
        x: f64,
        y: f64,
        distance: f64,
        tolerance: f64,
    },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("declared regularity {declared} but the boundary has {corners} corner(s)")]
    RegularityMismatch { declared: String, corners: usize },

    #[error("incompatible Neumann data: net boundary flux {imbalance:e} must vanish")]
    IncompatibleFlux { imbalance: f64 },

    #[error("configuration: {0}")]
    Configuration(String),

    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("denominator minimum {min_abs:e} is below the floor {floor:e}")]
    DivisionUnsafe { min_abs: f64, floor: f64 },

    #[error("continuation failed: {reason} (condition number {condition:e}, lambda {lambda:e})")]
    ContinuationFailed {
        reason: String,
        condition: f64,
        lambda: f64,
    },

    #[error("recovery degenerate: {masked} of {total} samples fall below the denominator floor")]
    RecoveryDegenerate {
        masked: usize,
        total: usize,
        mask: Vec<bool>,
    },

    #[error("surface ball under-resolved: fewer than {required} boundary nodes for r = {radius}; minimum usable radius {min_radius}")]
    UnderResolved {
        radius: f64,
        min_radius: f64,
        required: usize,
    },

    #[error("query outside the admissible regime: {0}")]
    OutsideRegime(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("certificate unavailable: {0}")]
    CertificateUnavailable(String),

    #[error("field is not discretely harmonic (relative interior residual {residual:e})")]
    NotHarmonic { residual: f64 },

    #[error("sample sets do not match: {0}")]
    SamplingMismatch(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
