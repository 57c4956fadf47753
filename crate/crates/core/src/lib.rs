//! Simulation and optimisation toolkit for downlink leaky-coaxial-cable
//! pinching-antenna systems.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod game;
pub mod geometry;
pub mod power;
pub mod rate;
pub mod scenario;

pub use error::{Error, Result};
