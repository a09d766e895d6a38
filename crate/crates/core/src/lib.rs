//! Tactile 6DoF registration and tracking from surface-normal maps.
//!
//! The core solver aligns two normal maps with inverse-compositional
//! Gauss-Newton, recovering the out-of-plane translation from height maps.
//! Around it sit a keyframe tracker with single-loop closure, a
//! point-to-plane ICP baseline and an analytic tactile renderer used as
//! ground truth.

// `!(x > 0.0)` style checks are how parameters reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod icp;
pub mod maps;
pub mod se3;
pub mod solver;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
