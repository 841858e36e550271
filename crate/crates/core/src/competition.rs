//! Two independent branching random walks sharing one lattice, with each
//! site colored by the walk that occupies it first.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineConfig, EngineError, PopulationState, Stepper};
use crate::offspring::OffspringSpec;
use crate::rng::{tags, SimRng, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompetitionError {
    #[error("window [{lo}, {hi}] lies outside the colored range [{min}, {max}]")]
    WindowOutOfRange { lo: i64, hi: i64, min: i64, max: i64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    RedFirst,
    BlueFirst,
    FairCoin,
}

impl TieBreak {
    fn resolve<R: Rng + ?Sized>(self, rng: &mut R) -> Color {
        match self {
            TieBreak::RedFirst => Color::Red,
            TieBreak::BlueFirst => Color::Blue,
            TieBreak::FairCoin => {
                if rng.random::<bool>() {
                    Color::Red
                } else {
                    Color::Blue
                }
            }
        }
    }

    /// The rule with the roles of the colors exchanged.
    pub fn swapped(self) -> TieBreak {
        match self {
            TieBreak::RedFirst => TieBreak::BlueFirst,
            TieBreak::BlueFirst => TieBreak::RedFirst,
            TieBreak::FairCoin => TieBreak::FairCoin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub color: Color,
    pub first_visit_time: u64,
}

/// Append-only map from site to its first visit, stored as a growable
/// two-sided array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColorField {
    offset: i64,
    cells: Vec<Option<Visit>>,
    red: u64,
    blue: u64,
    range: Option<(i64, i64)>,
}

impl ColorField {
    pub fn get(&self, site: i64) -> Option<Visit> {
        let i = site.checked_sub(self.offset)?;
        if i < 0 {
            return None;
        }
        self.cells.get(i as usize).copied().flatten()
    }

    fn ensure(&mut self, site: i64) {
        if self.cells.is_empty() {
            self.offset = site - 32;
            self.cells = vec![None; 64];
            return;
        }
        let len = self.cells.len() as i64;
        if site < self.offset {
            let grow = (self.offset - site).max(len);
            let mut cells = vec![None; grow as usize];
            cells.append(&mut self.cells);
            self.cells = cells;
            self.offset -= grow;
        } else if site >= self.offset + len {
            let grow = (site - self.offset - len + 1).max(len);
            self.cells.extend(std::iter::repeat_n(None, grow as usize));
        }
    }

    /// Colors `site` unless it already has a color; returns whether it was fresh.
    pub fn color(&mut self, site: i64, visit: Visit) -> bool {
        if self.get(site).is_some() {
            return false;
        }
        self.ensure(site);
        self.cells[(site - self.offset) as usize] = Some(visit);
        match visit.color {
            Color::Red => self.red += 1,
            Color::Blue => self.blue += 1,
        }
        self.range = Some(match self.range {
            None => (site, site),
            Some((a, b)) => (a.min(site), b.max(site)),
        });
        true
    }

    /// `(red sites, blue sites)`.
    pub fn counts(&self) -> (u64, u64) {
        (self.red, self.blue)
    }

    /// Smallest and largest colored site.
    pub fn colored_range(&self) -> Option<(i64, i64)> {
        self.range
    }

    /// Whether each color appears in `[lo, hi]`, which must lie inside the
    /// colored range.
    pub fn presence(&self, lo: i64, hi: i64) -> Result<(bool, bool), CompetitionError> {
        let (min, max) = self.range.unwrap_or((0, -1));
        if lo > hi || lo < min || hi > max {
            return Err(CompetitionError::WindowOutOfRange { lo, hi, min, max });
        }
        let mut found = (false, false);
        for site in lo..=hi {
            match self.get(site).map(|v| v.color) {
                Some(Color::Red) => found.0 = true,
                Some(Color::Blue) => found.1 = true,
                None => {}
            }
            if found == (true, true) {
                break;
            }
        }
        Ok(found)
    }

    /// Colored sites in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Visit)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|v| (self.offset + i as i64, v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArenaState {
    pub red: PopulationState,
    pub blue: PopulationState,
    pub colors: ColorField,
    pub tie_break: TieBreak,
    pub generation: u64,
    /// Sites freshly colored in the last generation, per color.
    pub new_red_sites: u64,
    pub new_blue_sites: u64,
}

/// Both walks start with one particle; the start sites are colored at time 0.
pub fn arena_init<R: Rng + ?Sized>(
    red_start: i64,
    blue_start: i64,
    tie_break: TieBreak,
    tie_rng: &mut R,
) -> ArenaState {
    let mut colors = ColorField::default();
    if red_start == blue_start {
        let color = tie_break.resolve(tie_rng);
        colors.color(red_start, Visit { color, first_visit_time: 0 });
    } else {
        colors.color(red_start, Visit { color: Color::Red, first_visit_time: 0 });
        colors.color(blue_start, Visit { color: Color::Blue, first_visit_time: 0 });
    }
    let (new_red_sites, new_blue_sites) = colors.counts();
    ArenaState {
        red: PopulationState::init(red_start),
        blue: PopulationState::init(blue_start),
        colors,
        tie_break,
        generation: 0,
        new_red_sites,
        new_blue_sites,
    }
}

/// Random streams for one arena generation.
pub struct ArenaRngs<'r, A: Rng + ?Sized, B: Rng + ?Sized, C: Rng + ?Sized> {
    pub red: &'r mut A,
    pub blue: &'r mut B,
    pub tie: &'r mut C,
}

/// Steppers for both colors.
#[derive(Debug, Clone)]
pub struct ArenaStepper<'a> {
    red: Stepper<'a>,
    blue: Stepper<'a>,
}

impl<'a> ArenaStepper<'a> {
    pub fn new(
        red_spec: &'a OffspringSpec,
        blue_spec: &'a OffspringSpec,
        red_config: EngineConfig,
        blue_config: EngineConfig,
    ) -> Result<Self, EngineError> {
        Ok(ArenaStepper { red: Stepper::new(red_spec, red_config)?, blue: Stepper::new(blue_spec, blue_config)? })
    }

    /// Advances both walks independently, then colors every newly occupied,
    /// still uncolored site; sites reached by both in the same generation go
    /// through the tie-break rule.
    pub fn step<A: Rng + ?Sized, B: Rng + ?Sized, C: Rng + ?Sized>(
        &mut self,
        state: &ArenaState,
        rngs: ArenaRngs<'_, A, B, C>,
    ) -> Result<ArenaState, EngineError> {
        let red = self.red.step(&state.red, rngs.red)?;
        let blue = self.blue.step(&state.blue, rngs.blue)?;
        let generation = state.generation + 1;
        let mut colors = state.colors.clone();

        let fresh = |pop: &PopulationState| -> Vec<i64> {
            pop.occupied().map(|s| s.0).filter(|&s| colors.get(s).is_none()).collect()
        };
        let fresh_red = fresh(&red);
        let fresh_blue = fresh(&blue);

        let (mut new_red, mut new_blue) = (0, 0);
        let (mut i, mut j) = (0, 0);
        while i < fresh_red.len() || j < fresh_blue.len() {
            let r = fresh_red.get(i).copied().unwrap_or(i64::MAX);
            let b = fresh_blue.get(j).copied().unwrap_or(i64::MAX);
            let (site, color) = if r < b {
                i += 1;
                (r, Color::Red)
            } else if b < r {
                j += 1;
                (b, Color::Blue)
            } else {
                i += 1;
                j += 1;
                (r, state.tie_break.resolve(rngs.tie))
            };
            colors.color(site, Visit { color, first_visit_time: generation });
            match color {
                Color::Red => new_red += 1,
                Color::Blue => new_blue += 1,
            }
        }
        Ok(ArenaState {
            red,
            blue,
            colors,
            tie_break: state.tie_break,
            generation,
            new_red_sites: new_red,
            new_blue_sites: new_blue,
        })
    }
}

/// One arena generation with freshly built steppers.
pub fn arena_step<A: Rng + ?Sized, B: Rng + ?Sized, C: Rng + ?Sized>(
    state: &ArenaState,
    red_spec: &OffspringSpec,
    blue_spec: &OffspringSpec,
    red_config: &EngineConfig,
    blue_config: &EngineConfig,
    rngs: ArenaRngs<'_, A, B, C>,
) -> Result<ArenaState, EngineError> {
    ArenaStepper::new(red_spec, blue_spec, *red_config, *blue_config)?.step(state, rngs)
}

/// An arena replica driven by per-generation streams tagged red, blue and tie.
#[derive(Debug, Clone)]
pub struct Arena<'a> {
    stepper: ArenaStepper<'a>,
    state: ArenaState,
    key: StreamKey,
}

impl<'a> Arena<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        red_spec: &'a OffspringSpec,
        blue_spec: &'a OffspringSpec,
        red_config: EngineConfig,
        blue_config: EngineConfig,
        red_start: i64,
        blue_start: i64,
        tie_break: TieBreak,
        key: StreamKey,
    ) -> Result<Self, EngineError> {
        let stepper = ArenaStepper::new(red_spec, blue_spec, red_config, blue_config)?;
        let mut tie_rng = key.with_tag(tags::TIE).generation_rng(0);
        let mut state = arena_init(red_start, blue_start, tie_break, &mut tie_rng);
        state.red = PopulationState::init_with_mode(red_start, red_config.mode);
        state.blue = PopulationState::init_with_mode(blue_start, blue_config.mode);
        Ok(Arena { stepper, state, key })
    }

    pub fn state(&self) -> &ArenaState {
        &self.state
    }

    pub fn advance(&mut self) -> Result<&ArenaState, EngineError> {
        let g = self.state.generation + 1;
        let mut red: SimRng = self.key.with_tag(tags::RED).generation_rng(g);
        let mut blue: SimRng = self.key.with_tag(tags::BLUE).generation_rng(g);
        let mut tie: SimRng = self.key.with_tag(tags::TIE).generation_rng(g);
        self.state = self
            .stepper
            .step(&self.state, ArenaRngs { red: &mut red, blue: &mut blue, tie: &mut tie })?;
        Ok(&self.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gaps {
    /// `M_b - M_r`.
    pub right: i64,
    /// `L_r - L_b`.
    pub left: i64,
}

pub fn frontier_gaps(state: &ArenaState) -> Result<Gaps, EngineError> {
    Ok(Gaps {
        right: state.blue.max_position()? - state.red.max_position()?,
        left: state.red.min_position()? - state.blue.min_position()?,
    })
}

/// Uncolored sites next to the red extremes, split by the parity of the
/// distance to the extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct HoleCensus {
    pub ahead_even: u64,
    pub ahead_odd: u64,
    pub behind_even: u64,
    pub behind_odd: u64,
}

/// Census over `[M_r + 1, M_r + window]` and `[L_r - window, L_r - 1]`.
pub fn hole_census(state: &ArenaState, window: u64) -> Result<HoleCensus, EngineError> {
    let (max_r, min_r) = (state.red.max_position()?, state.red.min_position()?);
    let mut census = HoleCensus::default();
    for k in 1..=window as i64 {
        let even = k % 2 == 0;
        if state.colors.get(max_r + k).is_none() {
            if even {
                census.ahead_even += 1
            } else {
                census.ahead_odd += 1
            }
        }
        if state.colors.get(min_r - k).is_none() {
            if even {
                census.behind_even += 1
            } else {
                census.behind_odd += 1
            }
        }
    }
    Ok(census)
}

/// True when no two adjacent sites in `[M_r + 1, M_r + window]` (and the
/// mirrored window left of `L_r`) are both non-blue.
pub fn blue_covers_alternate_sites(state: &ArenaState, window: u64) -> Result<bool, EngineError> {
    let (max_r, min_r) = (state.red.max_position()?, state.red.min_position()?);
    let blue = |s: i64| state.colors.get(s).is_some_and(|v| v.color == Color::Blue);
    let w = window as i64;
    let ahead = (1..w).all(|k| blue(max_r + k) || blue(max_r + k + 1));
    let behind = (1..w).all(|k| blue(min_r - k) || blue(min_r - k - 1));
    Ok(ahead && behind)
}

pub fn color_counts(state: &ArenaState) -> (u64, u64) {
    state.colors.counts()
}

/// Whether each color appears among the sites in `[lo, hi]`.
pub fn window_presence(state: &ArenaState, lo: i64, hi: i64) -> Result<(bool, bool), CompetitionError> {
    state.colors.presence(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowPresence {
    pub lo: i64,
    pub hi: i64,
    pub red: bool,
    pub blue: bool,
}

/// Presence flags for the windows `[2^k, 2^{k+1} - 1]` inside the colored range.
pub fn dyadic_presence(state: &ArenaState) -> Vec<WindowPresence> {
    let mut out = Vec::new();
    let mut lo = 1i64;
    loop {
        let hi = 2 * lo - 1;
        match window_presence(state, lo, hi) {
            Ok((red, blue)) => out.push(WindowPresence { lo, hi, red, blue }),
            Err(_) => break,
        }
        lo *= 2;
    }
    out
}

/// One row of the arena record CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArenaRecord {
    pub n: u64,
    #[serde(rename = "M_r")]
    pub max_red: i64,
    #[serde(rename = "L_r")]
    pub min_red: i64,
    #[serde(rename = "M_b")]
    pub max_blue: i64,
    #[serde(rename = "L_b")]
    pub min_blue: i64,
    pub right_gap: i64,
    pub left_gap: i64,
    pub red_sites: u64,
    pub blue_sites: u64,
    pub holes_ahead_even: u64,
    pub holes_ahead_odd: u64,
}

impl ArenaRecord {
    pub fn of(state: &ArenaState, hole_window: u64) -> Result<Self, EngineError> {
        let gaps = frontier_gaps(state)?;
        let holes = hole_census(state, hole_window)?;
        let (red_sites, blue_sites) = color_counts(state);
        Ok(ArenaRecord {
            n: state.generation,
            max_red: state.red.max_position()?,
            min_red: state.red.min_position()?,
            max_blue: state.blue.max_position()?,
            min_blue: state.blue.min_position()?,
            right_gap: gaps.right,
            left_gap: gaps.left,
            red_sites,
            blue_sites,
            holes_ahead_even: holes.ahead_even,
            holes_ahead_odd: holes.ahead_odd,
        })
    }
}

pub fn write_arena_csv<W: Write>(records: &[ArenaRecord], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
