use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("backward requires activations cached by a train-mode forward pass")]
    MissingCache,

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("non-binary modulator input {0}")]
    NonBinary(f64),

    #[error("cannot normalize a zero-energy block")]
    ZeroEnergy,

    #[error("degenerate channel: |g| = {magnitude:e} at dimension {index}")]
    DegenerateChannel { index: usize, magnitude: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("{0} interferers exceed the mixture enumeration cap of 12")]
    TooManyInterferers(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("target accuracy {eta} infeasible; feasible range is ({lo}, {hi})")]
    Infeasible { eta: f64, lo: f64, hi: f64 },

    #[error("training diverged at epoch {epoch}, user {user}: {detail}")]
    Divergence { epoch: usize, user: usize, detail: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("image {height}x{width} too small for {scales} MS-SSIM scales")]
    ImageTooSmall { height: usize, width: usize, scales: usize },

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        Error::ShapeMismatch { expected: expected.to_vec(), got: got.to_vec() }
    }
}
