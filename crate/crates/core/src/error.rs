use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("constraint violation (residual {residual:.3e}): {detail}")]
    ConstraintViolation { residual: f64, detail: String },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("unsupported for this model: {0}")]
    Unsupported(String),

    #[error("adaptive step size underflow at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("value {value:?} is a singular value of the momentum map")]
    SingularValue { value: [f64; 2] },

    #[error("no return to the orbit within time horizon {horizon}")]
    ReturnNotFound { horizon: f64 },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("integration path meets a singular value near {near:?}")]
    PathThroughSingularValue { near: [f64; 2] },

    #[error("branch ambiguity: tau1 lift jumped by {jump:.3} between nodes")]
    BranchAmbiguity { jump: f64 },

    #[error("system is not simple: focus-focus values share c1 = {c1}")]
    NotSimple { c1: f64 },

    #[error("edge direction ({dx:.6}, {dy:.6}) is not rational within tolerance")]
    NonRationalEdge { dx: f64, dy: f64 },

    #[error("point is not a focus-focus singularity: {0}")]
    NotFocusFocus(String),

    #[error("ill-conditioned normalization (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("ray intercept spread {spread:.3e} exceeds {limit:.1e}")]
    SpreadTooLarge { spread: f64, limit: f64 },

    #[error("eigenvalue blocks of J are ambiguous (gap {gap:.3e})")]
    BlockAmbiguity { gap: f64 },

    #[error("not a lattice: {0}")]
    NotALattice(String),

    #[error("lattice transport ambiguous at window {window} (margin {margin:.3})")]
    TransportAmbiguity { window: usize, margin: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable name used in structured error reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::BadParameter(_) => "BadParameter",
            Error::Unsupported(_) => "Unsupported",
            Error::StepFailure { .. } => "StepFailure",
            Error::NoConvergence(_) => "NoConvergence",
            Error::SingularValue { .. } => "SingularValue",
            Error::ReturnNotFound { .. } => "ReturnNotFound",
            Error::EmptyGrid(_) => "EmptyGrid",
            Error::PathThroughSingularValue { .. } => "PathThroughSingularValue",
            Error::BranchAmbiguity { .. } => "BranchAmbiguity",
            Error::NotSimple { .. } => "NotSimple",
            Error::NonRationalEdge { .. } => "NonRationalEdge",
            Error::NotFocusFocus(_) => "NotFocusFocus",
            Error::IllConditioned(_) => "IllConditioned",
            Error::SpreadTooLarge { .. } => "SpreadTooLarge",
            Error::BlockAmbiguity { .. } => "BlockAmbiguity",
            Error::NotALattice(_) => "NotALattice",
            Error::TransportAmbiguity { .. } => "TransportAmbiguity",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ConstraintViolation { .. }
                | Error::BadParameter(_)
                | Error::Unsupported(_)
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
