use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command-line front-end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Validation,
    Numerical,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Validation => 3,
            Category::Numerical => 4,
            Category::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {condition}")]
    Validation { condition: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("reduction to (dq, dp, dqp) coordinates needs a single oscillator, got N = {n}")]
    UnsupportedReduction { n: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("step size underflow at t = {time:e} (h = {step:e}); problem is too stiff for the explicit integrator")]
    Stiffness { time: f64, step: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("general landscape construction not applicable: {0}")]
    NotApplicable(String),

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("zero-mode pairing matrix M_l M_r is singular (condition number {condition:e})")]
    DegeneratePairing { condition: f64 },

    #[error("zero eigenvalue of the vectorized drift is defective: rank(H) = {rank1}, rank(H^2) = {rank2}")]
    DefectiveZeroMode { rank1: usize, rank2: usize },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} > bound {bound:e}")]
    Quadrature { estimate: f64, error: f64, bound: f64 },

    #[error("non-physical covariance at t = {time:e}: min eigenvalue {min_eigenvalue:e} (norm {norm:e})")]
    NonPhysical { time: f64, min_eigenvalue: f64, norm: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(condition: impl Into<String>) -> Self {
        Error::Validation { condition: condition.into() }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Config { .. } => Category::Config,
            Error::Validation { .. }
            | Error::Dimension { .. }
            | Error::UnsupportedReduction { .. }
            | Error::Unsupported(_)
            | Error::WrongRegime(_)
            | Error::NotApplicable(_)
            | Error::InsufficientData(_) => Category::Validation,
            Error::Stiffness { .. }
            | Error::DegeneratePairing { .. }
            | Error::DefectiveZeroMode { .. }
            | Error::Quadrature { .. }
            | Error::NonPhysical { .. }
            | Error::LinearAlgebra(_) => Category::Numerical,
            Error::Io(_) => Category::Io,
        }
    }
}
