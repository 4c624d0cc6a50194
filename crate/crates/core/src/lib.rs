//! Joint device-activity detection and channel estimation for grant-free
//! random access over time-varying delay-Doppler OFDM channels.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of
//! the pipeline:
//!
//! * [`channel`] draws device activity and multipath realizations and builds
//!   the exact per-super-symbol channel matrices.
//! * [`pilots`] holds the super-symbol OFDM geometry, pilot books and the
//!   received-signal synthesis.
//! * [`dictionary`] is the grid-based parametric model: delay/Doppler grids,
//!   the measurement matrix and channel reconstruction.
//! * [`mvsp`] is the message-passing receiver (linear module, MRF support
//!   prior and activity coupling).
//! * [`em`] learns the grid coordinates around the receiver.
//! * [`baselines`] has OMP and SBL for comparison.
//! * [`metrics`] computes NMSE and detection error probability.
//!
//! IO, configuration and the experiment runner live in the `gfra-sim` crate.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod channel;
pub mod dictionary;
pub mod em;
mod error;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod mvsp;
pub mod pilots;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
