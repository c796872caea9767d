//! Sequential design of computer experiments driven by feature-specific
//! expected improvement.
//!
//! A Gaussian-process surrogate ([`gp`]) is refitted after every simulator
//! run; the next run goes where an expected-improvement criterion ([`ei`])
//! peaks. The criterion is maximized either by branch and bound over
//! rectangles ([`bnb`]) or by a genetic algorithm ([`ga`]). [`seq`] drives
//! the loop and [`experiment`] replicates the comparisons between them.

pub mod bnb;
pub mod ei;
pub mod error;
pub mod experiment;
pub mod ga;
pub mod gp;
pub mod lhs;
pub mod normal;
pub mod seq;
pub mod testbed;

pub use bnb::{bnb_maximize, BnbConfig, BnbResult, GapTolerance, Rectangle};
pub use ei::{BestEstimates, FeatureTarget, PredBox};
pub use error::{Error, Result};
pub use ga::{ga_maximize, GaConfig, GaResult};
pub use gp::{fit_mle, DesignData, GpFit, GpFitter, GpParams};
pub use seq::{
    contour_divergence, run_sequential, static_baseline, Optimizer, RunTrace, SequentialDesign,
};
pub use testbed::{Extremum, TestFunction};
