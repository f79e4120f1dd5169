//! Deterministic discrete-event simulation of reliable link-adaptive
//! position-based routing (RLPR) for UAV swarms, with AODV and RARP-lite
//! baselines, metric extraction and sweep orchestration.

pub mod baselines;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod phys;
pub mod protocol;
pub mod rlpr;
pub mod scenario;
pub mod sweep;
pub mod wire;
