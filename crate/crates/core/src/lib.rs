//! Monte Carlo laboratory for one-dimensional branching random walks and
//! two-color first-visit competition.
//!
//! * [`offspring`]: finite offspring point processes and their log-Laplace calculus
//! * [`calibration`]: tangent points, centerings and matched-speed constructions
//! * [`engine`]: exact count-based simulation, with a frontier-window mode
//! * [`genealogy`]: individual-level trees with ancestry
//! * [`competition`]: red/blue arenas with a first-visit color field
//! * [`experiments`]: replica farms and the statistics built on them

pub mod calibration;
pub mod competition;
pub mod engine;
pub mod experiments;
pub mod genealogy;
pub mod offspring;
pub mod rng;
