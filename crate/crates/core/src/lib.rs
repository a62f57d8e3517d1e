//! Bivariate partial information decomposition (shared, unique and
//! synergistic information of `S` about `(Y, Z)`) with certified optima,
//! gradient oracles and extractable shared information.
//!
//! All quantities are in nats unless a function says otherwise.

pub mod dist;
pub mod error;
pub mod extract;
pub mod info;
pub mod pid;
pub mod solver;

pub use dist::{gates, pushforward, Axis, AxisSet, JointDistribution, Labels, StochasticMatrix};
pub use error::{PidError, Result};
pub use extract::{
    check_sandwich, project_simplex, si_club, si_ext, ExtractOptions, ExtractionResult,
};
pub use info::MeasureSelector;
pub use pid::{pid, pid_gradients, GradientBundle, PidResult, Quantity, Unit};
pub use solver::{
    solve, verify_kkt, Coupling, KktCertificate, KktReport, SolveOptions, SolveReport,
};
