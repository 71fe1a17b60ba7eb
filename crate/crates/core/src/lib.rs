//! Hierarchical-modulation multicast simulator for LTE single-frequency networks.

pub mod channel;
pub mod config;
pub mod deployment;
pub mod engine;
pub mod error;
pub mod hqam;
pub mod linkchar;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
