//! Forecasting of sparse, noisy, recurrent trajectories.
//!
//! Historical analogues of the current state are located, their forward
//! sub-trajectories are densified along minimum-energy paths on a gridded
//! cost field, and every future timestep gets a product-kernel density
//! estimate, a point prediction (its mode) and a highest-density region.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command-line interface live in the `trajkde` companion crate.

#![cfg_attr(not(test), no_std)]
// `!(a < b)` comparisons are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod energy;
mod error;
pub mod forecast;
pub mod geometry;
pub mod hdr;
pub mod kde;
pub mod kernel;
pub mod metrics;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use geometry::{Metric, Point, Trajectory, Velocity};
pub use kernel::{Bandwidth, Kernel};
