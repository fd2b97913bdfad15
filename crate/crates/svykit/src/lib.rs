//! Finite-population survey sampling.
//!
//! Frames, sampling designs, design-based estimators, allocation, calibration
//! weighting, variance estimation and an exact/Monte Carlo verification
//! harness.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code indexes several arrays with one counter.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod frame;
pub mod linalg;
pub mod rng;
pub mod designs;
pub mod allocation;
pub mod estimators;
pub mod calibration;
pub mod variance;
pub mod diagnostics;
pub mod nonresponse;
pub mod smallarea;
pub mod simulate;
pub mod cli;

pub use error::{Error, Result};
pub use frame::{DesignDistribution, Frame, InclusionProbs, Sample, Selection, Unit};
pub use designs::{draw, enumerate_design, first_order_pips, joint_pips, Design, Phase2Rule};
pub use rng::RngStream;
