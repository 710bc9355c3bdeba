use thiserror::Error;

/// A GF(2) equation `sum(vars) = rhs` that cannot be satisfied together with the
/// rows it was combined from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// Indices of the input equations whose sum reduces to `0 = 1`.
    pub equations: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infinite coupling present in energy evaluation")]
    InfiniteCoupling,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("frustrated constraint system (equations {:?} sum to 0 = 1)", .0.equations)]
    Frustrated(Certificate),
    #[error("instance too large for exact enumeration: {free} free variables, cap {cap}")]
    TooLarge { free: usize, cap: usize },
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("gauge-fixed edges contain a cycle: {0:?}")]
    GaugeCycle(Vec<usize>),
    #[error("fanout {fanout} needs {fanout} ends but an encoded line in 3D has only 2")]
    EndsBound { fanout: usize },
    #[error("open loop: vertex {0} has odd degree")]
    OpenLoop(usize),
    #[error("layout overlap at {0}")]
    Overlap(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("observable paths disagree: {0}")]
    Disagreement(String),
    #[error("penalty sector weight {weight:e} above tolerance {tol:e}")]
    PenaltyTooLarge { weight: f64, tol: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TooLarge { .. } | Error::CapExceeded(_) => 4,
            Error::Verification(_) | Error::Disagreement(_) | Error::PenaltyTooLarge { .. } => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::InfiniteCoupling => "infinite_coupling",
            Error::Unsupported(_) => "unsupported",
            Error::Frustrated(_) => "frustrated",
            Error::TooLarge { .. } => "too_large",
            Error::CapExceeded(_) => "cap_exceeded",
            Error::GaugeCycle(_) => "gauge_cycle",
            Error::EndsBound { .. } => "ends_bound",
            Error::OpenLoop(_) => "open_loop",
            Error::Overlap(_) => "overlap",
            Error::Verification(_) => "verification",
            Error::Disagreement(_) => "disagreement",
            Error::PenaltyTooLarge { .. } => "penalty",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
