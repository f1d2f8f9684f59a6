//! Margin-closed Gaussian VAR(k) models and Gaussian-copula time series
//! with non-Gaussian margins.
//!
//! A margin-closed model is a VAR(k) process on `d` variables together with a
//! partition of the variables into sub-processes, each of which is itself a
//! VAR(k). The [`closure`] module builds such models from per-sub-process
//! correlation structures; [`estimation`] fits them by multi-stage quasi
//! maximum likelihood.

pub mod error;
pub mod linalg;
pub mod margins;
pub mod optim;
pub mod serde_matrix;
pub mod cli;
pub mod closure;
pub mod estimation;
pub mod var;

pub use error::{Error, Result};
pub use linalg::Matrix;
