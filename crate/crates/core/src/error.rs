use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The probed energy sits within the resonance threshold of the box spectrum.
    #[error("singular energy {energy}: distance to spectrum {distance:e}")]
    SingularEnergy { energy: f64, distance: f64 },

    #[error("eigensolver did not converge: attained residual {residual:e}")]
    NonConvergence { residual: f64 },

    #[error("spectral data does not cover [{lo}, {hi}]")]
    IncompleteSpectrum { lo: f64, hi: f64 },

    #[error("tail exponent undefined for measure with atoms")]
    UndefinedTail,

    /// A parameter gate failed; `constraint` names the violated inequality.
    #[error("infeasible parameters: {constraint} ({detail})")]
    Infeasible {
        constraint: &'static str,
        detail: String,
    },

    #[error("compute budget exceeded: {sites} sites > budget {budget}")]
    BudgetExceeded { sites: u64, budget: u64 },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("missing or corrupt manifest in {0}")]
    MissingManifest(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::SingularEnergy { .. } => "singular-energy",
            Error::NonConvergence { .. } => "non-convergence",
            Error::IncompleteSpectrum { .. } => "incomplete-spectrum",
            Error::UndefinedTail => "undefined-tail",
            Error::Infeasible { .. } => "infeasible",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::Parse { .. } => "parse",
            Error::MissingManifest(_) => "missing-manifest",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
