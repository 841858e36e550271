use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::multinomial::{multinomial_into, DEFAULT_EXACT_THRESHOLD};
use super::EngineError;
use crate::calibration::CalibrationResult;
use crate::offspring::OffspringSpec;

/// Largest admissible saturation threshold.
pub const MAX_COUNT_CAP: u64 = 1 << 63;
pub const DEFAULT_COUNT_CAP: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Frontier,
}

/// Which ends of the cloud a frontier window keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierSides {
    /// Keep `[max - W, max]` only.
    Upper,
    /// Keep `[max - W, max]` and `[min, min + W]`.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub window: u64,
    pub sides: FrontierSides,
    pub count_cap: u64,
    pub rng_seed: u64,
    pub exact_multinomial_threshold: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::exact()
    }
}

impl EngineConfig {
    pub fn exact() -> Self {
        EngineConfig {
            mode: Mode::Exact,
            window: 0,
            sides: FrontierSides::Upper,
            count_cap: DEFAULT_COUNT_CAP,
            rng_seed: 0,
            exact_multinomial_threshold: DEFAULT_EXACT_THRESHOLD,
        }
    }

    pub fn frontier(window: u64) -> Self {
        EngineConfig { mode: Mode::Frontier, window, ..EngineConfig::exact() }
    }

    pub fn with_sides(self, sides: FrontierSides) -> Self {
        EngineConfig { sides, ..self }
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        EngineConfig { rng_seed, ..self }
    }

    /// `ceil(20 / theta_o) + 10 * M`.
    pub fn default_window(calib: &CalibrationResult, spec: &OffspringSpec) -> u64 {
        (20.0 / calib.theta_o).ceil() as u64 + 10 * spec.support_bound() as u64
    }

    pub fn validate(&self, spec: &OffspringSpec) -> Result<(), EngineError> {
        if self.count_cap == 0 || self.count_cap > MAX_COUNT_CAP {
            return Err(EngineError::InvalidConfig(format!(
                "count cap {} outside [1, 2^63]",
                self.count_cap
            )));
        }
        if self.mode == Mode::Frontier && self.window < 4 * spec.support_bound() as u64 {
            return Err(EngineError::InvalidConfig(format!(
                "window {} smaller than 4 * support bound {}",
                self.window,
                spec.support_bound()
            )));
        }
        Ok(())
    }
}

/// Sites dropped by one frontier truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationEntry {
    pub generation: u64,
    pub dropped_sites: u64,
    pub dropped_particles: u64,
}

/// Append-only log shared between successive states, so a step copies a
/// pointer instead of the whole history.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LogNode {
    entry: TruncationEntry,
    len: usize,
    prev: Option<Arc<LogNode>>,
}

impl Drop for LogNode {
    // unlink iteratively; the default recursive drop overflows on long runs
    fn drop(&mut self) {
        let mut prev = self.prev.take();
        while let Some(node) = prev {
            match Arc::try_unwrap(node) {
                Ok(mut node) => prev = node.prev.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Segment {
    offset: i64,
    counts: Vec<u64>,
}

impl Segment {
    fn lo(&self) -> i64 {
        self.offset
    }

    fn hi(&self) -> i64 {
        self.offset + self.counts.len() as i64 - 1
    }

    /// Strips zero counts at both ends; `None` if nothing is left.
    fn trimmed(mut self) -> Option<Segment> {
        let first = self.counts.iter().position(|&c| c > 0)?;
        let last = self.counts.iter().rposition(|&c| c > 0)?;
        self.counts.truncate(last + 1);
        self.counts.drain(..first);
        self.offset += first as i64;
        Some(self)
    }
}

/// Occupancy of one branching random walk at a given generation.
///
/// Counts live in a few contiguous arrays with offsets: one in exact mode,
/// up to two in two-sided frontier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    generation: u64,
    start: i64,
    mode: Mode,
    segments: Vec<Segment>,
    max_pos: i64,
    min_pos: i64,
    total: u64,
    total_saturated: bool,
    saturated: bool,
    saturation_events: u64,
    births_last_step: u64,
    truncation_log: Option<Arc<LogNode>>,
}

impl PopulationState {
    /// A single particle at `start`, generation 0.
    pub fn init(start: i64) -> Self {
        PopulationState {
            generation: 0,
            start,
            mode: Mode::Exact,
            segments: vec![Segment { offset: start, counts: vec![1] }],
            max_pos: start,
            min_pos: start,
            total: 1,
            total_saturated: false,
            saturated: false,
            saturation_events: 0,
            births_last_step: 0,
            truncation_log: None,
        }
    }

    pub fn init_with_mode(start: i64, mode: Mode) -> Self {
        PopulationState { mode, ..Self::init(start) }
    }

    /// Builds a state from explicit `(site, count)` pairs (zero counts ignored).
    pub fn from_counts(
        generation: u64,
        start: i64,
        counts: impl IntoIterator<Item = (i64, u64)>,
    ) -> Result<Self, EngineError> {
        let mut pairs: Vec<(i64, u64)> = counts.into_iter().filter(|p| p.1 > 0).collect();
        pairs.sort_unstable();
        let (lo, hi) = match (pairs.first(), pairs.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(EngineError::EmptyPopulation),
        };
        let mut seg = Segment { offset: lo, counts: vec![0; (hi - lo + 1) as usize] };
        for (site, c) in pairs {
            let slot = &mut seg.counts[(site - lo) as usize];
            *slot = slot.saturating_add(c);
        }
        let mut state = PopulationState { generation, ..Self::init(start) };
        state.segments = vec![seg];
        state.refresh();
        Ok(state)
    }

    fn refresh(&mut self) {
        self.max_pos = self.segments.last().map(Segment::hi).unwrap_or(self.start);
        self.min_pos = self.segments.first().map(Segment::lo).unwrap_or(self.start);
        let mut total = 0u64;
        let mut overflow = false;
        for c in self.segments.iter().flat_map(|s| s.counts.iter()) {
            match total.checked_add(*c) {
                Some(t) => total = t,
                None => {
                    total = u64::MAX;
                    overflow = true;
                }
            }
        }
        self.total = total;
        self.total_saturated = overflow;
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn max_position(&self) -> Result<i64, EngineError> {
        if self.is_empty() {
            return Err(EngineError::EmptyPopulation);
        }
        Ok(self.max_pos)
    }

    pub fn min_position(&self) -> Result<i64, EngineError> {
        if self.is_empty() {
            return Err(EngineError::EmptyPopulation);
        }
        Ok(self.min_pos)
    }

    /// Total particle count; `u64::MAX` when the sum overflowed.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// True when the total no longer equals the sum of counts.
    pub fn total_saturated(&self) -> bool {
        self.total_saturated
    }

    /// True once any site count has hit the cap during the run.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn saturation_events(&self) -> u64 {
        self.saturation_events
    }

    /// Children produced by the last step (sum of sampled totals per site).
    pub fn births_last_step(&self) -> u64 {
        self.births_last_step
    }

    /// Truncation entries, oldest first.
    pub fn truncation_log(&self) -> Vec<TruncationEntry> {
        let mut out = Vec::with_capacity(self.truncation_log.as_ref().map_or(0, |n| n.len));
        let mut node = self.truncation_log.as_deref();
        while let Some(n) = node {
            out.push(n.entry);
            node = n.prev.as_deref();
        }
        out.reverse();
        out
    }

    pub fn count_at(&self, site: i64) -> u64 {
        self.segments
            .iter()
            .find(|s| s.lo() <= site && site <= s.hi())
            .map(|s| s.counts[(site - s.offset) as usize])
            .unwrap_or(0)
    }

    /// Occupied sites in increasing order.
    pub fn occupied(&self) -> impl DoubleEndedIterator<Item = (i64, u64)> + '_ {
        self.segments.iter().flat_map(|s| {
            s.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(i, &c)| (s.offset + i as i64, c))
        })
    }

    pub fn occupancy(&self) -> Vec<(i64, u64)> {
        self.occupied().collect()
    }

    pub fn occupied_sites(&self) -> usize {
        self.occupied().count()
    }
}

/// Per-spec transition tables used by the aggregate step.
#[derive(Debug, Clone)]
enum Kernel {
    Product {
        counts: Vec<u64>,
        count_probs: Vec<f64>,
        steps: Vec<i64>,
        step_probs: Vec<f64>,
    },
    General {
        outcomes: Vec<Vec<(i64, u64)>>,
        outcome_probs: Vec<f64>,
    },
}

/// Reusable stepping machinery for one spec and config.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    spec: &'a OffspringSpec,
    config: EngineConfig,
    kernel: Kernel,
    /// Expected children per parent at each displacement, for capped sites.
    intensity: Vec<(i64, f64)>,
    scratch_a: Vec<u64>,
    scratch_b: Vec<u64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a OffspringSpec, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate(spec)?;
        let (kernel, intensity) = match spec {
            OffspringSpec::Product { count, step } => {
                let intensity =
                    step.atoms().iter().map(|&(d, p)| (d, p * count.mean())).collect();
                (
                    Kernel::Product {
                        counts: count.atoms().iter().map(|a| a.0).collect(),
                        count_probs: count.atoms().iter().map(|a| a.1).collect(),
                        steps: step.atoms().iter().map(|a| a.0).collect(),
                        step_probs: step.atoms().iter().map(|a| a.1).collect(),
                    },
                    intensity,
                )
            }
            OffspringSpec::General(g) => (
                Kernel::General {
                    outcomes: g.outcomes().iter().map(|o| o.0.points().to_vec()).collect(),
                    outcome_probs: g.outcomes().iter().map(|o| o.1).collect(),
                },
                g.intensity().to_vec(),
            ),
        };
        let (na, nb) = match &kernel {
            Kernel::Product { counts, steps, .. } => (counts.len(), steps.len()),
            Kernel::General { outcomes, .. } => (outcomes.len(), 0),
        };
        Ok(Stepper { spec, config, kernel, intensity, scratch_a: vec![0; na], scratch_b: vec![0; nb] })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Advances one generation. Sites are processed from the right-most one
    /// downwards so that the random numbers consumed near the front do not
    /// depend on the state further back.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &PopulationState,
        rng: &mut R,
    ) -> Result<PopulationState, EngineError> {
        if state.is_empty() {
            return Err(EngineError::EmptyPopulation);
        }
        let (dmin, dmax) = (self.spec.min_displacement(), self.spec.max_displacement());
        let mut out: Vec<Segment> = Vec::with_capacity(state.segments.len());
        for seg in &state.segments {
            let (lo, hi) = (seg.lo() + dmin, seg.hi() + dmax);
            match out.last_mut() {
                Some(prev) if lo <= prev.hi() + 1 => {
                    let extra = (hi - prev.hi()).max(0) as usize;
                    prev.counts.extend(std::iter::repeat_n(0, extra));
                }
                _ => out.push(Segment { offset: lo, counts: vec![0; (hi - lo + 1) as usize] }),
            }
        }

        let cap = self.config.count_cap;
        let threshold = self.config.exact_multinomial_threshold;
        let mut births = 0u64;
        let mut events = 0u64;
        let mut target = out.len();
        for seg in state.segments.iter().rev() {
            while target > 0 && out[target - 1].lo() > seg.lo() + dmin {
                target -= 1;
            }
            let dest = &mut out[target - 1];
            for (i, &c) in seg.counts.iter().enumerate().rev() {
                if c == 0 {
                    continue;
                }
                let site = seg.offset + i as i64;
                let base = site - dest.offset;
                let mut add = |d: i64, k: u64, events: &mut u64| {
                    if k == 0 {
                        return;
                    }
                    let slot = &mut dest.counts[(base + d) as usize];
                    let next = slot.saturating_add(k).min(cap);
                    if next == cap {
                        *events += 1;
                    }
                    *slot = next;
                };
                if c >= cap {
                    // saturated parents propagate deterministically at their mean
                    for &(d, w) in &self.intensity {
                        let k = (c as f64 * w).round().min(cap as f64) as u64;
                        births = births.saturating_add(k);
                        add(d, k, &mut events);
                    }
                    continue;
                }
                match &self.kernel {
                    Kernel::Product { counts, count_probs, steps, step_probs } => {
                        multinomial_into(rng, c, count_probs, threshold, &mut self.scratch_a);
                        let children: u128 = counts
                            .iter()
                            .zip(&self.scratch_a)
                            .map(|(&n, &k)| n as u128 * k as u128)
                            .sum();
                        let children = children.min(u64::MAX as u128) as u64;
                        births = births.saturating_add(children);
                        multinomial_into(rng, children, step_probs, threshold, &mut self.scratch_b);
                        for (&d, &k) in steps.iter().zip(&self.scratch_b) {
                            add(d, k, &mut events);
                        }
                    }
                    Kernel::General { outcomes, outcome_probs } => {
                        multinomial_into(rng, c, outcome_probs, threshold, &mut self.scratch_a);
                        for (outcome, &k) in outcomes.iter().zip(&self.scratch_a) {
                            if k == 0 {
                                continue;
                            }
                            for &(d, m) in outcome {
                                let n = k.saturating_mul(m);
                                births = births.saturating_add(n);
                                add(d, n, &mut events);
                            }
                        }
                    }
                }
            }
        }

        let mut next = PopulationState {
            generation: state.generation + 1,
            start: state.start,
            mode: self.config.mode,
            segments: out.into_iter().filter_map(Segment::trimmed).collect(),
            max_pos: 0,
            min_pos: 0,
            total: 0,
            total_saturated: false,
            saturated: state.saturated || events > 0,
            saturation_events: state.saturation_events + events,
            births_last_step: births,
            truncation_log: state.truncation_log.clone(),
        };
        next.refresh();
        if self.config.mode == Mode::Frontier {
            truncate_frontier(&mut next, &self.config);
        }
        Ok(next)
    }
}

/// One aggregate generation: per site, parents are split multinomially over
/// the count law and the resulting children multinomially over the steps.
pub fn step<R: Rng + ?Sized>(
    state: &PopulationState,
    spec: &OffspringSpec,
    config: &EngineConfig,
    rng: &mut R,
) -> Result<PopulationState, EngineError> {
    Stepper::new(spec, *config)?.step(state, rng)
}

/// Drops sites outside the frontier window(s) and caps counts.
pub fn truncate_frontier(state: &mut PopulationState, config: &EngineConfig) {
    if state.is_empty() {
        return;
    }
    let w = config.window.min(i64::MAX as u64) as i64;
    let (max, min) = (state.max_pos, state.min_pos);
    let mut keep = vec![(max.saturating_sub(w), max)];
    if config.sides == FrontierSides::Both {
        let low = (min, min.saturating_add(w));
        if low.1 + 1 >= keep[0].0 {
            keep[0].0 = min;
        } else {
            keep.insert(0, low);
        }
    }

    let mut dropped_sites = 0u64;
    let mut dropped_particles = 0u64;
    let mut segments = Vec::with_capacity(state.segments.len() + 1);
    for seg in std::mem::take(&mut state.segments) {
        for (i, &c) in seg.counts.iter().enumerate() {
            let site = seg.offset + i as i64;
            if c > 0 && !keep.iter().any(|&(a, b)| a <= site && site <= b) {
                dropped_sites += 1;
                dropped_particles = dropped_particles.saturating_add(c);
            }
        }
        for &(a, b) in &keep {
            let lo = a.max(seg.lo());
            let hi = b.min(seg.hi());
            if lo > hi {
                continue;
            }
            let slice = &seg.counts[(lo - seg.offset) as usize..=(hi - seg.offset) as usize];
            let piece = Segment {
                offset: lo,
                counts: slice.iter().map(|&c| c.min(config.count_cap)).collect(),
            };
            if let Some(piece) = piece.trimmed() {
                segments.push(piece);
            }
        }
    }
    state.segments = segments;
    if dropped_sites > 0 {
        let prev = state.truncation_log.take();
        let len = prev.as_ref().map_or(0, |n| n.len) + 1;
        let entry = TruncationEntry { generation: state.generation, dropped_sites, dropped_particles };
        state.truncation_log = Some(Arc::new(LogNode { entry, len, prev }));
    }
    state.refresh();
}
