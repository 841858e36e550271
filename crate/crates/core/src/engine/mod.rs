//! Aggregate (count-based) simulation of one-dimensional branching random walks.

mod multinomial;
mod state;
mod trajectory;

pub use multinomial::{binomial, ln_factorial, multinomial_counts, multinomial_into, DEFAULT_EXACT_THRESHOLD};
pub use state::{
    step, truncate_frontier, EngineConfig, FrontierSides, Mode, PopulationState, Stepper,
    TruncationEntry, DEFAULT_COUNT_CAP, MAX_COUNT_CAP,
};
pub use trajectory::{write_trajectory_csv, GenerationRecord, Walk};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}
