use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("column {0} has zero sample variance")]
    ZeroVarianceColumn(usize),

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NonPsdCovariance(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("proximal step requires positive curvature, got q = {0}")]
    NonpositiveCurvature(f64),

    #[error("coordinate {0} has zero curvature with a nonzero penalty")]
    DegenerateCurvature(usize),

    #[error("no candidate direction satisfied the cone inequality")]
    NoConeMemberSampled,

    #[error("bound denominator is not positive ({0:e})")]
    DegenerateDenominator(f64),

    #[error("comparison requires an exact source (delta = 0)")]
    NonzeroDelta,

    #[error("cone margin 2*alpha*rho - c - rho must be positive, got {0}")]
    ConeMarginViolated(f64),

    #[error("index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(&'static str),

    #[error("wrong penalty shape: {0}")]
    WrongPenaltyShape(&'static str),

    #[error("oracle supports p <= 3, got p = {0}")]
    DimensionTooLarge(usize),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<toml::de::Error> for Error {
    fn from(err: toml::de::Error) -> Self {
        Error::Config(err.to_string())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
