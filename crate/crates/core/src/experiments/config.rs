use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::calibration::CalibrationResult;
use crate::competition::TieBreak;
use crate::engine::{EngineConfig, FrontierSides, Mode, DEFAULT_COUNT_CAP};
use crate::offspring::OffspringSpec;

/// Engine choice as written in a config file. A missing window means the
/// default `ceil(20/theta) + 10 M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSetup {
    #[serde(default = "frontier")]
    pub mode: Mode,
    #[serde(default)]
    pub window: Option<u64>,
    #[serde(default = "default_cap")]
    pub count_cap: u64,
}

fn frontier() -> Mode {
    Mode::Frontier
}

fn default_cap() -> u64 {
    DEFAULT_COUNT_CAP
}

impl Default for EngineSetup {
    fn default() -> Self {
        EngineSetup { mode: Mode::Frontier, window: None, count_cap: DEFAULT_COUNT_CAP }
    }
}

impl EngineSetup {
    pub fn exact() -> Self {
        EngineSetup { mode: Mode::Exact, ..Default::default() }
    }

    pub fn frontier(window: Option<u64>) -> Self {
        EngineSetup { window, ..Default::default() }
    }

    /// Engine config for `spec`. The default window needs a calibration.
    pub fn resolve(
        &self,
        spec: &OffspringSpec,
        calib: Option<&CalibrationResult>,
        sides: FrontierSides,
    ) -> Result<EngineConfig, ExperimentError> {
        let base = match self.mode {
            Mode::Exact => EngineConfig::exact(),
            Mode::Frontier => {
                let window = match (self.window, calib) {
                    (Some(w), _) => w,
                    (None, Some(c)) => EngineConfig::default_window(c, spec),
                    (None, None) => {
                        return Err(ExperimentError::Config(
                            "frontier mode without a tangent point needs an explicit window".into(),
                        ))
                    }
                };
                EngineConfig::frontier(window).with_sides(sides)
            }
        };
        Ok(EngineConfig { count_cap: self.count_cap, ..base })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArenaKind {
    Coexistence,
    Noncoexistence,
}

/// Everything a CLI experiment needs. Spec paths are resolved relative to
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub red_spec: Option<PathBuf>,
    #[serde(default)]
    pub blue_spec: Option<PathBuf>,
    /// Build red and blue with `construct_noncoexistence_pair(m)` instead of
    /// reading spec files.
    #[serde(default)]
    pub construct_pair: Option<f64>,
    #[serde(default = "d_horizon")]
    pub horizon: u64,
    #[serde(default = "d_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub z_grid: Vec<f64>,
    #[serde(default = "d_c1")]
    pub c1: f64,
    #[serde(default = "d_c2")]
    pub c2: f64,
    /// Hard limit on overshoot scans, on top of `e^{cap_factor theta z}`.
    #[serde(default = "d_generation_cap")]
    pub generation_cap: u64,
    #[serde(default = "d_cap_factor")]
    pub cap_factor: f64,
    #[serde(default)]
    pub engine: EngineSetup,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,

    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    #[serde(default = "d_q")]
    pub q: u32,
    #[serde(default)]
    pub horizons: Vec<u32>,
    #[serde(default = "d_budget")]
    pub tree_budget: u64,

    #[serde(default = "d_arena")]
    pub arena: ArenaKind,
    #[serde(default)]
    pub red_start: i64,
    #[serde(default = "d_blue_start")]
    pub blue_start: i64,
    #[serde(default = "d_tie")]
    pub tie_break: TieBreak,
    /// Site-count threshold for the both-colors-grow indicator.
    #[serde(default = "d_site_threshold")]
    pub site_threshold: u64,
    /// First generation of the gap regression.
    #[serde(default = "d_n0")]
    pub gap_fit_start: u64,
    /// Trailing share of generations scanned for fresh red sites.
    #[serde(default = "d_plateau")]
    pub plateau_share: f64,
}

fn d_horizon() -> u64 {
    100
}
fn d_replicas() -> u64 {
    100
}
fn d_c1() -> f64 {
    0.5
}
fn d_c2() -> f64 {
    1.0
}
fn d_generation_cap() -> u64 {
    1_000_000
}
fn d_cap_factor() -> f64 {
    1.5
}
fn d_epsilon() -> f64 {
    0.5
}
fn d_q() -> u32 {
    3
}
fn d_budget() -> u64 {
    crate::genealogy::DEFAULT_BUDGET
}
fn d_arena() -> ArenaKind {
    ArenaKind::Coexistence
}
fn d_blue_start() -> i64 {
    1
}
fn d_tie() -> TieBreak {
    TieBreak::FairCoin
}
fn d_site_threshold() -> u64 {
    50
}
fn d_n0() -> u64 {
    50
}
fn d_plateau() -> f64 {
    0.2
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.replicas == 0 {
            return fail("replicas must be at least 1");
        }
        if self.z_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("z_grid must be strictly increasing");
        }
        if !(self.c1 > 0.0 && self.c1 < self.c2) {
            return fail("need 0 < c1 < c2");
        }
        if !(self.plateau_share > 0.0 && self.plateau_share <= 1.0) {
            return fail("plateau_share must lie in (0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"red_spec": "a.json", "z_grid": [2, 3]}"#).unwrap();
        assert_eq!(c.engine, EngineSetup::default());
        assert_eq!((c.replicas, c.blue_start, c.q), (100, 1, 3));
        assert!(ExperimentConfig::from_json(r#"{"z_grid": [3, 2]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"c1": 2, "c2": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"replicas": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"unknown": 0}"#).is_err());
        let e = ExperimentConfig::from_json(r#"{"engine": {"mode": "exact"}}"#).unwrap();
        assert_eq!(e.engine, EngineSetup::exact());
    }
}
