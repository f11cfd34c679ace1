//! Experiment runner for federated sliced inverse regression: synthetic
//! simulations, table reproduction, the tracing-attack demo and CSV ingestion.

pub mod config;
pub mod experiment;
pub mod io;
pub mod reference;
