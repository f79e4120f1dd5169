//! Multi-seed, multi-protocol batch execution over one config axis.

use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::{EngineError, Simulation, Trace, TraceError};
use crate::metrics::{MetricLedger, RunResult};
use crate::protocol::ProtocolKind;
use crate::scenario::Layout;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{protocol} {axis}={value} seed {seed}: {source}")]
    Engine { protocol: ProtocolKind, axis: String, value: f64, seed: u64, source: EngineError },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Config key varied along the sweep, e.g. `node_count`.
    pub axis: String,
    pub values: Vec<f64>,
    pub protocols: Vec<ProtocolKind>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn run_count(&self) -> usize {
        self.values.len() * self.protocols.len() * self.seeds.len()
    }
}

/// Location of one persisted trace under `dir`.
pub fn trace_path(dir: &Path, protocol: ProtocolKind, axis: &str, value: f64, seed: u64) -> PathBuf {
    dir.join(protocol.as_str()).join(format!("{axis}={value}")).join(format!("seed-{seed}.ndjson"))
}

pub fn run_once(cfg: &ScenarioConfig, layout: &Layout, seed: u64) -> Result<Trace, EngineError> {
    Simulation::new(cfg, layout, seed)?.run()
}

/// The config for one sweep point, validated.
pub fn point_config(base: &ScenarioConfig, axis: &str, value: f64, protocol: ProtocolKind) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = base.clone();
    cfg.protocol = protocol;
    cfg.set(axis, &value.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every (value, protocol, seed) combination on `workers` threads.
/// Results come back in a fixed order regardless of scheduling. When
/// `trace_dir` is set each trace is written there as well.
pub fn run_sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    workers: usize,
    trace_dir: Option<&Path>,
) -> Result<Vec<RunResult>, SweepError> {
    run_sweep_each(base, spec, workers, trace_dir)?.into_iter().collect()
}

/// Like [`run_sweep`] but keeps going past failed runs, so callers can
/// report what did finish. Only config and thread-pool problems abort.
pub fn run_sweep_each(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    workers: usize,
    trace_dir: Option<&Path>,
) -> Result<Vec<Result<RunResult, SweepError>>, SweepError> {
    let mut jobs = Vec::with_capacity(spec.run_count());
    for &value in &spec.values {
        for &p in &spec.protocols {
            let cfg = point_config(base, &spec.axis, value, p)?;
            for &seed in &spec.seeds {
                jobs.push((cfg.clone(), value, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, value, seed)| {
                let trace = run_once(cfg, &Layout::Random, *seed).map_err(|source| SweepError::Engine {
                    protocol: cfg.protocol,
                    axis: spec.axis.clone(),
                    value: *value,
                    seed: *seed,
                    source,
                })?;
                if let Some(dir) = trace_dir {
                    trace.save(&trace_path(dir, cfg.protocol, &spec.axis, *value, *seed))?;
                }
                Ok(RunResult { protocol: cfg.protocol, value: *value, seed: *seed, ledger: MetricLedger::from_trace(&trace) })
            })
            .collect()
    }))
}
