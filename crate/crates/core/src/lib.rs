//! Statistical safety arguments for an automated emergency-braking function.
//!
//! Component-level evidence (per-frame miss probability of the perception
//! system, stationary-obstacle rate of the road network) is turned into exact
//! one-sided confidence statements, composed into bounds on expected
//! collisions per km, and checked against a vehicle-level target. The
//! [`planning`] module sizes the data collection; the [`simulator`] replays
//! the scenario to check the bounds empirically.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod combine;
pub mod error;
pub mod evidence;
pub mod gsn;
pub mod intervals;
pub mod odd;
pub mod planning;
pub mod simulator;
mod tails;

pub use error::{Error, Result};

/// Exact tail probabilities, exposed for test oracles and diagnostics.
pub mod distributions {
    pub use crate::tails::{binom_cdf, binom_sf, pois_cdf, pois_sf};
}
