//! Superimposed-segment training and joint access/backhaul channel estimation
//! for an amplify-and-forward uplink in a cloud radio access network.
//!
//! An MS superimposes periodic training on its data, an RRH amplifies and
//! forwards the block to the BBU over a wireless backhaul, and the BBU jointly
//! estimates the time-varying access channel (as CE-BEM coefficients) and the
//! backhaul gain, then restores the access channel with AESNR-optimal weights.

pub mod channel;
pub mod config;
pub mod estimator;
pub mod harness;
pub mod numerics;
pub mod restoration;
pub mod transceiver;

pub use config::{ConfigError, SystemParams, ValidatedParams, VqProfile};
pub use numerics::{CVec, C64};
