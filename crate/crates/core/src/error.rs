use thiserror::Error;

use crate::{
    branching::BranchingError, coalescent::CoalescentError, duality::DualityError,
    frequency::FrequencyError, params::ParamsError, transform::TransformError,
};

/// Crate-wide error. Each variant wraps the error of one module and its
/// message is prefixed with that module's name.
#[derive(Debug, Error)]
pub enum Error {
    #[error("params: {0}")]
    Params(#[from] ParamsError),
    #[error("transform: {0}")]
    Transform(#[from] TransformError),
    #[error("coalescent: {0}")]
    Coalescent(#[from] CoalescentError),
    #[error("branching: {0}")]
    Branching(#[from] BranchingError),
    #[error("frequency: {0}")]
    Frequency(#[from] FrequencyError),
    #[error("duality: {0}")]
    Duality(#[from] DualityError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
