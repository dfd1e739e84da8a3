//! Hyperparameter selection for regularized linear inverse problems by
//! maximizing the marginal likelihood of the data, and Monte Carlo tools for
//! measuring the bias introduced by a wrongly assumed zero prior mean.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bias;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod marginal;
pub mod model;
pub mod problems;
pub mod sampling;
pub mod selection;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{Design, GroundTruth, Hyperparameters, InverseProblem, PriorModel};
