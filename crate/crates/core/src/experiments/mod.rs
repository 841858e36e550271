//! Replica farms and the statistics computed from them.
//!
//! Every replica draws from its own streams keyed by `(master_seed, replica)`,
//! replicas run on the rayon pool and results come back in replica order, so
//! a run is reproducible whatever the thread count.

mod arena;
mod config;
mod front;
pub mod stats;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::engine::EngineError;
use crate::genealogy::{self, GenealogyError};
use crate::offspring::OffspringSpec;
use crate::rng::{tags, StreamKey};

pub use arena::{
    check_coexistence_hypothesis, run_arena_replica, run_coexistence, run_noncoexistence,
    ArenaSetup, CoexistenceReplica, CoexistenceReport, ExpWindow, NoncoexistenceReplica,
    NoncoexistenceReport, RunRecord,
};
pub use config::{ArenaKind, EngineSetup, ExperimentConfig};
pub use front::{
    estimate_overshoot_time, fluct_summary, fluctuation_windows, max_positions,
    overshoot_cap, overshoot_scaling, overshoot_samples, overshoot_scaling_from_samples, overshoot_times, tail_fit,
    tail_fit_from_samples, FluctSummary, MaxSamples, Overshoot, OvershootLevel, OvershootReport,
    TailPoint, TailReport, BOOTSTRAP_RESAMPLES, MIN_EXCEEDANCES, MIN_UNCENSORED,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient tail: {0}")]
    InsufficientTail(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Genealogy(#[from] GenealogyError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Runs `job(replica)` for every replica, preserving replica order.
pub fn farm<T, F>(replicas: u64, job: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
{
    (0..replicas).into_par_iter().map(job).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemocracyReport {
    pub q: u32,
    pub horizons: Vec<u32>,
    /// Mean over trees of the democracy fraction, per horizon.
    pub mean: Vec<f64>,
    pub trees: u64,
}

/// Averages `democracy_stats(tree, q, h)` over independent trees, each grown
/// once to the largest horizon.
pub fn run_democracy(
    spec: &OffspringSpec,
    q: u32,
    horizons: &[u32],
    trees: u64,
    budget: u64,
    master_seed: u64,
) -> Result<DemocracyReport, ExperimentError> {
    let depth = *horizons
        .iter()
        .max()
        .ok_or_else(|| ExperimentError::Config("no horizons given".into()))?;
    let per_tree = farm(trees, |r| {
        let mut rng = StreamKey::new(master_seed, r, tags::TREE).rng();
        let tree = genealogy::grow(spec, 0, depth, budget, &mut rng)?;
        horizons
            .iter()
            .map(|&h| Ok(genealogy::democracy_stats(&tree, q, h)?))
            .collect::<Result<Vec<f64>, ExperimentError>>()
    })?;
    let mean = (0..horizons.len())
        .map(|i| per_tree.iter().map(|v| v[i]).sum::<f64>() / trees as f64)
        .collect();
    Ok(DemocracyReport { q, horizons: horizons.to_vec(), mean, trees })
}
