//! Deterministic simulator for peer-to-peer federated continual learning.
//!
//! A single model token travels between clients along a gossip (or ring)
//! schedule and is fine-tuned by each receiver with a proximal pull towards
//! the model it received. Client-server baselines (FedAvg, FedProx) and
//! isolated training run on the same synthetic non-IID federations and are
//! scored with the same three metrics and communication ledger.

pub mod algorithms;
pub mod data;
mod error;
pub mod evaluation;
pub mod numerics;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
