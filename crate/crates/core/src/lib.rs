//! Deterministic simulator for federated learning over clustered edge devices.
//!
//! Devices that cannot reach the aerial base station directly join a
//! device-to-device cluster whose elected head relays an aggregated model
//! upstream. The crate models the topology, cluster formation, head election,
//! local training (including autoencoder feature unification), probability-space
//! model aggregation, per-node energy accounting, and the end-to-end scenario
//! runner that compares direct-only federated learning against the clustered
//! variants.

pub mod aggregation;
pub mod cli;
pub mod clustering;
pub mod data;
pub mod energy;
pub mod error;
pub mod head_selection;
pub mod ml;
pub mod rng;
pub mod scenarios;
pub mod topology;

pub use error::{Error, Result};

/// Identifier of a simulated device.
pub type DeviceId = u32;
