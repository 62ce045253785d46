//! Stochastic multimode gain competition, gravitational wedge billiards and
//! the pattern statistics used to tell regular from chaotic mode patterns.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod billiard;
pub mod competition;
pub mod error;
pub mod rng;
pub mod sde;
pub mod special;
pub mod stability;
pub mod units;

pub use error::{Error, Result};
