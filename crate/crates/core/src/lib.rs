//! Simulator and optimizers for binary passive reflecting surfaces.
//!
//! The received channel is modelled as `h = h_Z + Σ bᵢ hᵢ` with each
//! element either reflecting (`bᵢ = 1`) or absorbing. The receiver only
//! reports RSSI, so the optimizers work from power ratios against the
//! all-off configuration.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod measurement;
pub mod optimize;
pub mod physics;
pub mod stats;
pub mod synth;

pub use channel::{
    capacity, capacity_improvement, evaluate_channel, ideal_upper_bound, rssi_ratio_exact,
    ChannelCoefficient, Environment, SurfaceConfig,
};
pub use error::{Error, Result};
pub use measurement::{measure, MeasurementRecord, MeasurementSession, NoiseModel};
