use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("moment order {p} not available in closed form (supported: {supported:?})")]
    UnsupportedMomentOrder { p: u32, supported: Vec<u32> },

    #[error("degenerate weight scheme: b_n = 0")]
    DegenerateScheme,

    #[error(
        "refusing S_n/sigma_n normalization: sigma_n^2/b_n^2 = {ratio:.3e} is below the floor \
         {floor:.3e}, so the liminf condition of the sigma_n-normalized CLT is not met"
    )]
    DegenerateSigma { ratio: f64, floor: f64 },

    #[error("insufficient replications: need at least {needed}, got {got}")]
    InsufficientReplications { needed: usize, got: usize },

    #[error("site {0} lies outside the enumerated window")]
    SiteOutsideWindow(String),

    #[error("variable is not centered on the finite space (mean {0:e})")]
    NonCentered(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
