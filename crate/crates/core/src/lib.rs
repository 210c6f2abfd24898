//! Exact conditional confidence intervals for two-stage adaptive enrichment trials.

pub mod bvn;
pub mod cli;
pub mod condnorm;
pub mod designs;
pub mod error;
pub mod intervals;
pub mod normal;
pub mod quad;
pub mod roots;
pub mod sim;

pub use condnorm::{ConditionalNormal, Evaluator};
pub use error::{Error, Result};
