//! Vibrational stabilization of cluster synchronization in Kuramoto
//! oscillator networks.
//!
//! The pipeline runs `network` (partition, invariance, incidence trees) →
//! `reduction` (phase-difference coordinates) → `vibration` (schedules and
//! linearized blocks) → `averaging` (transition matrices, averaged blocks)
//! → `certify` (Lyapunov robustness, growth bounds, M-matrix test), with
//! `simulate` for direct integration and `design` for amplitude search.

pub mod averaging;
pub mod bundled;
pub mod certify;
pub mod config;
pub mod design;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod reduction;
pub mod simulate;
pub mod synthetic;
pub mod vibration;

pub use error::{Error, Result};
