//! Two-color arena experiments: coexistence under matched calibrations and
//! red extinction for a constructed pair.

use serde::Serialize;

use super::stats::{median, ols, mann_whitney_greater, MannWhitney};
use super::{farm, EngineSetup, ExperimentError};
use crate::calibration::{solve_theta, CalibrationResult, NoncoexistencePair, DEFAULT_TOLERANCE};
use crate::competition::{
    blue_covers_alternate_sites, dyadic_presence, Arena, ArenaRecord, ArenaState, ColorField,
    TieBreak, WindowPresence,
};
use crate::engine::{EngineConfig, FrontierSides};
use crate::offspring::OffspringSpec;
use crate::rng::{tags, StreamKey};

/// Tolerance on the matching of `theta` and `kappa(theta)` between colors.
const HYPOTHESIS_TOLERANCE: f64 = 1e-10;

/// Specs, engines and starting data of one arena.
#[derive(Debug, Clone, Copy)]
pub struct ArenaSetup<'a> {
    pub red: &'a OffspringSpec,
    pub blue: &'a OffspringSpec,
    pub red_config: EngineConfig,
    pub blue_config: EngineConfig,
    pub red_start: i64,
    pub blue_start: i64,
    pub tie_break: TieBreak,
    /// Window used by the hole census and the blue coverage check.
    pub hole_window: u64,
}

impl<'a> ArenaSetup<'a> {
    /// Both engines resolved from `engine` with two-sided frontier windows.
    pub fn new(
        red: &'a OffspringSpec,
        blue: &'a OffspringSpec,
        engine: &EngineSetup,
    ) -> Result<Self, ExperimentError> {
        let red_cal = solve_theta(red, DEFAULT_TOLERANCE)?;
        let blue_cal = solve_theta(blue, DEFAULT_TOLERANCE)?;
        Ok(ArenaSetup {
            red,
            blue,
            red_config: engine.resolve(red, Some(&red_cal), FrontierSides::Both)?,
            blue_config: engine.resolve(blue, Some(&blue_cal), FrontierSides::Both)?,
            red_start: 0,
            blue_start: 1,
            tie_break: TieBreak::FairCoin,
            hole_window: red.support_bound().max(1) as u64,
        })
    }
}

/// Per-generation history of one arena replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    /// Generations `0..=horizon`.
    pub records: Vec<ArenaRecord>,
    pub new_red_sites: Vec<u64>,
    pub new_blue_sites: Vec<u64>,
    /// Blue covers every other site next to the red extremes.
    pub blue_coverage: Vec<bool>,
    pub dyadic: Vec<WindowPresence>,
    pub saturated: bool,
    #[serde(skip)]
    pub final_colors: ColorField,
}

impl RunRecord {
    /// Sign changes of `M_b - M_r`, zeros skipped.
    pub fn leadership_swaps(&self) -> u64 {
        let mut last = 0i64;
        let mut swaps = 0;
        for r in &self.records {
            let s = r.right_gap.signum();
            if s != 0 {
                if last != 0 && s != last {
                    swaps += 1;
                }
                last = s;
            }
        }
        swaps
    }
}

pub fn run_arena_replica(
    setup: &ArenaSetup<'_>,
    horizon: u64,
    key: StreamKey,
) -> Result<RunRecord, ExperimentError> {
    let mut arena = Arena::new(
        setup.red,
        setup.blue,
        setup.red_config,
        setup.blue_config,
        setup.red_start,
        setup.blue_start,
        setup.tie_break,
        key,
    )?;
    let cap = horizon as usize + 1;
    let mut run = RunRecord {
        records: Vec::with_capacity(cap),
        new_red_sites: Vec::with_capacity(cap),
        new_blue_sites: Vec::with_capacity(cap),
        blue_coverage: Vec::with_capacity(cap),
        dyadic: Vec::new(),
        saturated: false,
        final_colors: ColorField::default(),
    };
    let push = |run: &mut RunRecord, s: &ArenaState| -> Result<(), ExperimentError> {
        run.records.push(ArenaRecord::of(s, setup.hole_window)?);
        run.new_red_sites.push(s.new_red_sites);
        run.new_blue_sites.push(s.new_blue_sites);
        run.blue_coverage.push(blue_covers_alternate_sites(s, setup.hole_window)?);
        Ok(())
    };
    push(&mut run, arena.state())?;
    for _ in 0..horizon {
        let state = arena.advance()?;
        push(&mut run, state)?;
    }
    let state = arena.state();
    run.dyadic = dyadic_presence(state);
    run.saturated = state.red.is_saturated() || state.blue.is_saturated();
    run.final_colors = state.colors.clone();
    Ok(run)
}

/// Both calibrations, provided `theta` and `kappa(theta)` agree.
pub fn check_coexistence_hypothesis(
    red: &OffspringSpec,
    blue: &OffspringSpec,
) -> Result<(CalibrationResult, CalibrationResult), ExperimentError> {
    let r = solve_theta(red, DEFAULT_TOLERANCE)?;
    let b = solve_theta(blue, DEFAULT_TOLERANCE)?;
    if (r.theta_o - b.theta_o).abs() > HYPOTHESIS_TOLERANCE
        || (r.kappa_at - b.kappa_at).abs() > HYPOTHESIS_TOLERANCE
    {
        return Err(ExperimentError::HypothesisViolation(format!(
            "theta {} vs {}, kappa(theta) {} vs {}",
            r.theta_o, b.theta_o, r.kappa_at, b.kappa_at
        )));
    }
    Ok((r, b))
}

/// Presence of both colors in `[ceil(e^{c1 z}), floor(e^{c2 z})]`; `None`
/// when the window leaves the colored range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpWindow {
    pub z: f64,
    pub lo: i64,
    pub hi: i64,
    pub presence: Option<(bool, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoexistenceReplica {
    pub red_sites: u64,
    pub blue_sites: u64,
    pub swaps: u64,
    pub both_above_threshold: bool,
    pub dyadic: Vec<WindowPresence>,
    pub exp_windows: Vec<ExpWindow>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoexistenceReport {
    pub horizon: u64,
    pub site_threshold: u64,
    pub fraction_both_above: f64,
    pub fraction_with_swap: f64,
    pub mean_swaps: f64,
    pub replicas: Vec<CoexistenceReplica>,
    /// Full history of replica 0.
    pub first_run: RunRecord,
}

#[allow(clippy::too_many_arguments)]
pub fn run_coexistence(
    setup: &ArenaSetup<'_>,
    horizon: u64,
    replicas: u64,
    master_seed: u64,
    site_threshold: u64,
    z_grid: &[f64],
    c1: f64,
    c2: f64,
) -> Result<CoexistenceReport, ExperimentError> {
    check_coexistence_hypothesis(setup.red, setup.blue)?;
    let runs = farm(replicas, |r| {
        let run = run_arena_replica(setup, horizon, StreamKey::new(master_seed, r, tags::SINGLE))?;
        let last = run.records.last().expect("generation 0 recorded");
        let exp_windows = z_grid
            .iter()
            .map(|&z| {
                let lo = (c1 * z).exp().ceil() as i64;
                let hi = (c2 * z).exp().floor() as i64;
                ExpWindow { z, lo, hi, presence: run.final_colors.presence(lo, hi).ok() }
            })
            .collect();
        let summary = CoexistenceReplica {
            red_sites: last.red_sites,
            blue_sites: last.blue_sites,
            swaps: run.leadership_swaps(),
            both_above_threshold: last.red_sites > site_threshold && last.blue_sites > site_threshold,
            dyadic: run.dyadic.clone(),
            exp_windows,
            saturated: run.saturated,
        };
        Ok((summary, if r == 0 { Some(run) } else { None }))
    })?;
    let mut first_run = None;
    let mut out = Vec::with_capacity(runs.len());
    for (summary, run) in runs {
        if run.is_some() {
            first_run = run;
        }
        out.push(summary);
    }
    let n = out.len() as f64;
    Ok(CoexistenceReport {
        horizon,
        site_threshold,
        fraction_both_above: out.iter().filter(|r| r.both_above_threshold).count() as f64 / n,
        fraction_with_swap: out.iter().filter(|r| r.swaps > 0).count() as f64 / n,
        mean_swaps: out.iter().map(|r| r.swaps as f64).sum::<f64>() / n,
        replicas: out,
        first_run: first_run.expect("replica 0 kept"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoncoexistenceReplica {
    /// Least-squares slope of `right_gap` against `log n` on `[n0, horizon]`.
    pub gap_slope: f64,
    /// Share of the trailing generations in which red colored nothing new.
    pub plateau: f64,
    /// Same statistic when blue is replaced by a copy of red.
    pub control_plateau: f64,
    pub last_fresh_red: u64,
    pub final_right_gap: i64,
    /// Blue coverage frequency over the first and last thirds of the run.
    pub coverage_early: f64,
    pub coverage_late: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoncoexistenceReport {
    pub horizon: u64,
    pub gap_fit_start: u64,
    pub plateau_share: f64,
    pub gap_constant_2c: f64,
    pub fraction_positive_slope: f64,
    pub median_slope: f64,
    pub median_plateau: f64,
    pub median_control_plateau: f64,
    /// Plateau statistic greater than the control's.
    pub plateau_test: MannWhitney,
    pub plateau_exceeds_control: bool,
    pub coverage_early: f64,
    pub coverage_late: f64,
    pub saturated_replicas: u64,
    pub replicas: Vec<NoncoexistenceReplica>,
    pub first_run: RunRecord,
}

fn plateau(run: &RunRecord, share: f64) -> f64 {
    let gens = run.new_red_sites.len() - 1;
    let tail = ((gens as f64 * share).ceil() as usize).max(1);
    let zero = run.new_red_sites[gens + 1 - tail..].iter().filter(|&&c| c == 0).count();
    zero as f64 / tail as f64
}

fn frequency(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&f| f).count() as f64 / flags.len().max(1) as f64
}

/// Runs the constructed pair and, with identical red streams, a control
/// arena in which blue is a copy of red.
#[allow(clippy::too_many_arguments)]
pub fn run_noncoexistence(
    pair: &NoncoexistencePair,
    engine: &EngineSetup,
    tie_break: TieBreak,
    horizon: u64,
    replicas: u64,
    master_seed: u64,
    gap_fit_start: u64,
    plateau_share: f64,
) -> Result<NoncoexistenceReport, ExperimentError> {
    pair.validate()?;
    if gap_fit_start + 2 > horizon || gap_fit_start == 0 {
        return Err(ExperimentError::Config(format!(
            "gap fit start {gap_fit_start} must lie in [1, horizon - 2]"
        )));
    }
    let mut setup = ArenaSetup::new(&pair.red, &pair.blue, engine)?;
    setup.tie_break = tie_break;
    setup.hole_window = pair.red_jump as u64;
    let mut control = ArenaSetup::new(&pair.red, &pair.red, engine)?;
    control.tie_break = tie_break;
    control.hole_window = pair.red_jump as u64;

    let xs: Vec<f64> = (gap_fit_start..=horizon).map(|n| (n as f64).ln()).collect();
    let runs = farm(replicas, |r| {
        let key = StreamKey::new(master_seed, r, tags::SINGLE);
        let run = run_arena_replica(&setup, horizon, key)?;
        let ctrl = run_arena_replica(&control, horizon, key)?;
        let ys: Vec<f64> =
            run.records[gap_fit_start as usize..].iter().map(|rec| rec.right_gap as f64).collect();
        let third = run.blue_coverage.len() / 3;
        let summary = NoncoexistenceReplica {
            gap_slope: ols(&xs, &ys).expect("distinct log n").slope,
            plateau: plateau(&run, plateau_share),
            control_plateau: plateau(&ctrl, plateau_share),
            last_fresh_red: run.new_red_sites.iter().rposition(|&c| c > 0).unwrap_or(0) as u64,
            final_right_gap: run.records.last().expect("recorded").right_gap,
            coverage_early: frequency(&run.blue_coverage[..third]),
            coverage_late: frequency(&run.blue_coverage[run.blue_coverage.len() - third..]),
            saturated: run.saturated || ctrl.saturated,
        };
        Ok((summary, if r == 0 { Some(run) } else { None }))
    })?;
    let mut first_run = None;
    let mut out = Vec::with_capacity(runs.len());
    for (summary, run) in runs {
        if run.is_some() {
            first_run = run;
        }
        out.push(summary);
    }
    let n = out.len() as f64;
    let col = |f: fn(&NoncoexistenceReplica) -> f64| out.iter().map(f).collect::<Vec<f64>>();
    let (plateaus, controls) = (col(|r| r.plateau), col(|r| r.control_plateau));
    let plateau_test = mann_whitney_greater(&plateaus, &controls);
    Ok(NoncoexistenceReport {
        horizon,
        gap_fit_start,
        plateau_share,
        gap_constant_2c: pair.gap_constant_2c,
        fraction_positive_slope: out.iter().filter(|r| r.gap_slope > 0.0).count() as f64 / n,
        median_slope: median(&col(|r| r.gap_slope)),
        median_plateau: median(&plateaus),
        median_control_plateau: median(&controls),
        plateau_exceeds_control: plateau_test.p_value < 0.05,
        plateau_test,
        coverage_early: col(|r| r.coverage_early).iter().sum::<f64>() / n,
        coverage_late: col(|r| r.coverage_late).iter().sum::<f64>() / n,
        saturated_replicas: out.iter().filter(|r| r.saturated).count() as u64,
        replicas: out,
        first_run: first_run.expect("replica 0 kept"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::{CountLaw, StepLaw};

    fn pm1(count: CountLaw) -> OffspringSpec {
        OffspringSpec::product(count, StepLaw::uniform(&[-1, 1]).unwrap())
    }

    #[test]
    fn hypothesis_check() {
        let a = pm1(CountLaw::new([(1, 0.5), (2, 0.5)]).unwrap());
        let b = pm1(CountLaw::new([(1, 0.4), (2, 0.6)]).unwrap());
        assert!(check_coexistence_hypothesis(&a, &a).is_ok());
        assert!(matches!(
            check_coexistence_hypothesis(&a, &b),
            Err(ExperimentError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn swaps_skip_zero_gaps() {
        let spec = pm1(CountLaw::constant(1).unwrap());
        let setup = ArenaSetup::new(
            &spec,
            &spec,
            &EngineSetup::exact(),
        );
        // N = 1 has no tangent point; the setup must refuse it
        assert!(setup.is_err());

        let mut run = RunRecord {
            records: Vec::new(),
            new_red_sites: vec![],
            new_blue_sites: vec![],
            blue_coverage: vec![],
            dyadic: vec![],
            saturated: false,
            final_colors: ColorField::default(),
        };
        for (i, g) in [1, 0, -2, 0, 0, -1, 3, 2].into_iter().enumerate() {
            run.records.push(ArenaRecord {
                n: i as u64,
                max_red: 0,
                min_red: 0,
                max_blue: g,
                min_blue: 0,
                right_gap: g,
                left_gap: 0,
                red_sites: 0,
                blue_sites: 0,
                holes_ahead_even: 0,
                holes_ahead_odd: 0,
            });
        }
        assert_eq!(run.leadership_swaps(), 2);
    }

    #[test]
    fn faster_red_takes_over() {
        // red with E[N] = 2 against blue with E[N] = 1.2: red overruns blue
        let red = pm1(CountLaw::constant(2).unwrap());
        let blue = pm1(CountLaw::new([(1, 0.8), (2, 0.2)]).unwrap());
        let setup = ArenaSetup {
            red: &red,
            blue: &blue,
            red_config: EngineConfig::exact(),
            blue_config: EngineConfig::exact(),
            red_start: 0,
            blue_start: 1,
            tie_break: TieBreak::FairCoin,
            hole_window: 1,
        };
        let mut blue_share = 0.0;
        for r in 0..20 {
            let run = run_arena_replica(&setup, 60, StreamKey::new(1, r, 0)).unwrap();
            let last = run.records.last().unwrap();
            blue_share += last.blue_sites as f64 / (last.red_sites + last.blue_sites) as f64;
            let late = &run.new_blue_sites[40..];
            assert!(late.iter().sum::<u64>() <= late.len() as u64 / 2);
        }
        assert!(blue_share / 20.0 < 0.25, "{blue_share}");
    }
}
