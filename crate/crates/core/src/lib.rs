//! Geometric constellation shaping with gradient-free autoencoder training.
//!
//! The library trains encoder/decoder neural-network pairs end to end over a
//! communication channel. The channel can be an arbitrary black box: the
//! optimizer is a cubature Kalman filter ([`ckf`]) that treats the network
//! weights as the state of a state-space model and needs no gradients, so
//! non-differentiable channels (e.g. blind-phase-search carrier recovery) are
//! supported. A backpropagation/Adam baseline is provided for differentiable
//! channels for comparison.
//!
//! Modules:
//! - [`nn`] — encoder/decoder networks, weight flattening, forward passes and
//!   the Adam baseline;
//! - [`channels`] — seedable AWGN, nonlinear-phase-noise fiber and
//!   Wiener-phase-noise + BPS channel simulators;
//! - [`ckf`] — the cubature Kalman filter optimizer;
//! - [`metrics`] — mutual-information lower-bound estimators;
//! - [`trainer`] — batch construction, training loop, hyperparameter grid
//!   search and the test protocol.

pub mod channels;
pub mod ckf;
pub mod constellation;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod trainer;

pub use constellation::Constellation;
pub use error::{Error, Result};
