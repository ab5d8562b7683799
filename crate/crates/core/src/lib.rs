//! Shape-based analytics for household load curves.
//!
//! The crate covers four pieces of work on 24-hour smart meter records:
//!
//! * [`dtw`]: a constrained dynamic time warping distance whose step pattern
//!   lets each hour align with at most two neighbouring hours of the other
//!   curve, plus a brute-force path enumerator used as a test oracle.
//! * [`cluster`]: K-medoids under DTW, a Lloyd K-means baseline, and the
//!   WC / WB / WCBCR quality measures together with per-household entropy.
//! * [`predict`]: next-day shape prediction from Markov chains over
//!   cluster-encoded periods, magnitude scaling, the DTWE error and a
//!   leave-one-out K x n_p model selection grid.
//! * [`pld`]: power level decomposition of a curve into a 24 x J appliance
//!   usage matrix, its distance identities, error bounds and their CDFs,
//!   and a sparse L1-regularised variant.
//!
//! [`synth`] generates labelled synthetic households with hour-level jitter
//! and [`curves`] holds the data model.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature spreads distance matrices and grid cells
//! over a rayon pool; results are identical with and without it.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cluster;
pub mod curves;
pub mod dtw;
mod error;
mod math;
mod par;
pub mod pld;
pub mod predict;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Number of hourly readings in a load curve.
pub const HOURS: usize = 24;
