//! Experiment runner behind the `fedpc` binary.

pub mod compare;
pub mod experiment;
pub mod output;
