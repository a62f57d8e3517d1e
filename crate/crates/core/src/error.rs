use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = PidError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PidError {
    #[error("negative probability mass {value} at outcome ({s}, {y}, {z})")]
    NegativeMass {
        s: String,
        y: String,
        z: String,
        value: f64,
    },

    #[error("total probability mass is {total}, expected 1")]
    MassNotOne { total: f64 },

    #[error("outcome ({s}, {y}, {z}) listed more than once")]
    DuplicateOutcome { s: String, y: String, z: String },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("empty label list for axis {0}")]
    EmptyAxis(char),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidStochasticMatrix(String),

    #[error("target and conditioning axes overlap")]
    AxisOverlap,

    #[error("distribution has zero mass at ({s}, {y}, {z}); full support required")]
    ZeroCellOnSupportRequired { s: usize, y: usize, z: usize },

    #[error("solver stopped without a certified optimum (primal {primal:.3e}, stationarity {stationarity:.3e}, zero cells {zero_cells:.3e})",
        primal = .0.certificate.residual_primal,
        stationarity = .0.certificate.residual_stationarity,
        zero_cells = .0.certificate.residual_zero_cells)]
    MaxIterationsExceeded(Box<SolveReport>),

    #[error("no admissible cells: the coupling program is empty")]
    DegenerateInstance,

    #[error("solution is not certified by its multipliers")]
    UncertifiedSolution,

    #[error("enumeration of {count} maps exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
