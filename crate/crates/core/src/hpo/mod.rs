//! Bayesian hyperparameter search: a Gaussian-process surrogate with an
//! Expected Improvement acquisition, minimizing validation RMSE.

mod acquisition;
mod gp;
mod space;
mod tune;

use thiserror::Error;

pub use self::acquisition::{candidate_points, expected_improvement, propose_among, propose_next, DEFAULT_CANDIDATES};
pub use self::gp::{GpConfig, SurrogateState};
pub use self::space::{
    load_search_spaces, params_from_assignment, parse_search_spaces, Assignment, ParamKind, ParamSpec, ParamValue,
    SearchSpace,
};
pub use self::tune::{
    fit_surrogate, history_csv, latin_hypercube, minimize, tune, tune_with, validation_error, StopReason, Trial,
    TrialStatus, TuneConfig, TuneResult, Validation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpoError {
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("no successful trials to fit the surrogate to")]
    NoSuccessfulTrials,
    #[error("kernel matrix is singular even at the largest jitter")]
    SingularKernel,
    #[error("budget {budget} is smaller than the initial design of {init}")]
    BudgetTooSmall { budget: usize, init: usize },
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid tuning configuration: {0}")]
    InvalidConfig(String),
}
