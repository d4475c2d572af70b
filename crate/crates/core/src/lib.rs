//! Finite-blocklength analysis of two-user superposition broadcasting: a common
//! message for both receivers, a private one for the stronger receiver, spherical
//! codebooks and nearest-neighbor decoding under possibly non-Gaussian noise.
//!
//! The crate has two halves:
//!
//! * closed-form analysis ([`analysis`], [`fading`]): capacities, dispersions,
//!   first-order, second-order (separate and joint error) and outage regions;
//! * validation ([`codec`], [`montecarlo`]): the actual coding scheme
//!   (spherical codebooks, superposition encoding, NN / SIC / JNN decoding),
//!   direct ensemble simulation and numerical evaluation of random-coding
//!   union bounds through exact sphere-cap tails.
//!
//! All rates are in nats.

pub mod analysis;
pub mod cli;
pub mod codec;
pub mod error;
pub mod fading;
pub mod fingerprint;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
