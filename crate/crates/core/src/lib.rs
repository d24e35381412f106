//! Intensity estimation for multivariate point processes with a log-linear
//! model on a partially ordered sample space.

// `!(x > 0.0)` style checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod empirical;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod io;
pub mod kde;
pub mod model;
pub mod optimizer;
pub mod poset;
pub mod simulate;

pub use error::{Error, Result};
pub use empirical::{Distribution, EventData, JointEvents, SmootherConfig};
pub use estimator::{Bandwidth, EstimatorConfig, FitSummary, FittedModel};
pub use model::{IntensityEstimate, ParamVector};
pub use optimizer::{FitConfig, FitReport, Init, Method};
pub use poset::{ParamDomain, PosetState, SampleSpace, Subset};
