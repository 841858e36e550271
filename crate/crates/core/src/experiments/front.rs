//! Statistics of a single walk's right-most particle: speed, fluctuation
//! windows, upper tail and first-overshoot times.

use rand::Rng;
use serde::Serialize;

use super::stats::{mean, ols, percentile_interval, quantile_sorted, sorted};
use super::{farm, ExperimentError};
use crate::calibration::{centering, fluct_bounds, CalibrationResult};
use crate::engine::{EngineConfig, Walk};
use crate::offspring::OffspringSpec;
use crate::rng::{tags, StreamKey};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Uncensored replicas required at every overshoot level.
pub const MIN_UNCENSORED: usize = 30;
/// Exceedances a tail grid point needs before it is used.
pub const MIN_EXCEEDANCES: u64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSamples {
    pub checkpoints: Vec<u64>,
    /// `values[r][i]` is `M_n` of replica `r` at `checkpoints[i]`.
    pub values: Vec<Vec<i64>>,
    /// Replicas that hit the count cap somewhere.
    pub saturated_replicas: u64,
}

impl MaxSamples {
    /// All replicas' maxima at one checkpoint.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i] as f64).collect()
    }
}

/// `M_n` at each checkpoint for independent replicas started at `start`.
pub fn max_positions(
    spec: &OffspringSpec,
    config: EngineConfig,
    start: i64,
    checkpoints: &[u64],
    replicas: u64,
    master_seed: u64,
) -> Result<MaxSamples, ExperimentError> {
    let mut points = checkpoints.to_vec();
    points.sort_unstable();
    points.dedup();
    let horizon = points.last().copied().unwrap_or(0);
    let runs = farm(replicas, |r| {
        let mut walk = Walk::new(spec, config, start, StreamKey::new(master_seed, r, tags::SINGLE))?;
        let mut out = Vec::with_capacity(points.len());
        let mut next = points.iter().peekable();
        while next.peek() == Some(&&0) {
            out.push(start);
            next.next();
        }
        while walk.state().generation() < horizon {
            let state = walk.advance()?;
            if next.peek() == Some(&&state.generation()) {
                out.push(state.max_position()?);
                next.next();
            }
        }
        Ok((out, walk.state().is_saturated()))
    })?;
    let saturated_replicas = runs.iter().filter(|r| r.1).count() as u64;
    Ok(MaxSamples { checkpoints: points, values: runs.into_iter().map(|r| r.0).collect(), saturated_replicas })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Overshoot {
    Hit(u64),
    Censored { cap: u64 },
}

impl Overshoot {
    fn log_time(self) -> f64 {
        match self {
            Overshoot::Hit(t) => (t as f64).ln(),
            Overshoot::Censored { .. } => f64::INFINITY,
        }
    }
}

/// Scan limit for level `z`: `min(generation_cap, ceil(e^{factor theta z}))`.
pub fn overshoot_cap(calib: &CalibrationResult, z: f64, factor: f64, generation_cap: u64) -> u64 {
    let natural = (factor * calib.theta_o * z).exp().ceil();
    if natural >= generation_cap as f64 {
        generation_cap
    } else {
        (natural as u64).max(1)
    }
}

/// First `n >= 1` with `M_n - m_n > z` for each level, all read off one
/// walk. Levels must be increasing; `caps[i]` bounds the scan for level `i`.
pub fn overshoot_times(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    z_grid: &[f64],
    caps: &[u64],
    config: EngineConfig,
    key: StreamKey,
) -> Result<Vec<Overshoot>, ExperimentError> {
    if z_grid.iter().any(|&z| z.is_nan() || z <= 0.0) {
        return Err(ExperimentError::Config("overshoot levels must be positive".into()));
    }
    let mut walk = Walk::new(spec, config, 0, key)?;
    let mut out: Vec<Option<Overshoot>> = vec![None; z_grid.len()];
    let last_cap = caps.iter().copied().max().unwrap_or(0);
    let mut pending = z_grid.len();
    while pending > 0 && walk.state().generation() < last_cap {
        let state = walk.advance()?;
        let n = state.generation();
        let excess = state.max_position()? as f64 - centering(calib, n)?;
        for (i, slot) in out.iter_mut().enumerate() {
            if slot.is_none() {
                if excess > z_grid[i] {
                    *slot = Some(Overshoot::Hit(n));
                    pending -= 1;
                } else if n >= caps[i] {
                    *slot = Some(Overshoot::Censored { cap: caps[i] });
                    pending -= 1;
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .zip(caps)
        .map(|(o, &cap)| o.unwrap_or(Overshoot::Censored { cap }))
        .collect())
}

/// First overshoot time of a single level.
pub fn estimate_overshoot_time(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    z: f64,
    generation_cap: u64,
    config: EngineConfig,
    key: StreamKey,
) -> Result<Overshoot, ExperimentError> {
    Ok(overshoot_times(spec, calib, &[z], &[generation_cap], config, key)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvershootLevel {
    pub z: f64,
    pub cap: u64,
    pub replicas: usize,
    pub censored: usize,
    /// Censored replicas count as larger than every hit.
    pub median_log_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvershootReport {
    pub levels: Vec<OvershootLevel>,
    pub slope: f64,
    pub intercept: f64,
    pub ci_95: (f64, f64),
    /// Bootstrap resamples that produced a finite slope.
    pub bootstrap_used: usize,
    /// Per replica, per level.
    pub samples: Vec<Vec<Overshoot>>,
}

fn median_log(samples: &[Vec<Overshoot>], idx: impl Iterator<Item = usize> + Clone, level: usize) -> f64 {
    let logs: Vec<f64> = idx.map(|r| samples[r][level].log_time()).collect();
    let s = sorted(&logs);
    let m = quantile_sorted(&s, 0.5);
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

/// Least-squares slope of the median `log T(z)` against `z`, with a
/// replica-bootstrap percentile interval.
pub fn overshoot_scaling_from_samples<R: Rng + ?Sized>(
    z_grid: &[f64],
    samples: Vec<Vec<Overshoot>>,
    caps: &[u64],
    resamples: usize,
    rng: &mut R,
) -> Result<OvershootReport, ExperimentError> {
    if z_grid.len() < 3 {
        return Err(ExperimentError::InsufficientData(format!(
            "{} overshoot levels, need at least 3",
            z_grid.len()
        )));
    }
    let replicas = samples.len();
    let mut levels = Vec::with_capacity(z_grid.len());
    for (i, &z) in z_grid.iter().enumerate() {
        let censored = samples.iter().filter(|s| matches!(s[i], Overshoot::Censored { .. })).count();
        let median_log_t = median_log(&samples, 0..replicas, i);
        if replicas - censored < MIN_UNCENSORED || !median_log_t.is_finite() {
            return Err(ExperimentError::InsufficientData(format!(
                "level z={z}: {} of {replicas} replicas uncensored",
                replicas - censored
            )));
        }
        levels.push(OvershootLevel { z, cap: caps[i], replicas, censored, median_log_t });
    }
    let medians: Vec<f64> = levels.iter().map(|l| l.median_log_t).collect();
    let fit = ols(z_grid, &medians).expect("distinct levels");

    let mut slopes = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; replicas];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..replicas);
        }
        let m: Vec<f64> = (0..z_grid.len()).map(|i| median_log(&samples, idx.iter().copied(), i)).collect();
        if m.iter().all(|v| v.is_finite()) {
            slopes.push(ols(z_grid, &m).expect("distinct levels").slope);
        }
    }
    let ci_95 = if slopes.is_empty() { (f64::NAN, f64::NAN) } else { percentile_interval(&slopes, 0.95) };
    Ok(OvershootReport {
        levels,
        slope: fit.slope,
        intercept: fit.intercept,
        ci_95,
        bootstrap_used: slopes.len(),
        samples,
    })
}

/// Per-replica overshoot times for every level, one walk per replica.
#[allow(clippy::too_many_arguments)]
pub fn overshoot_samples(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    z_grid: &[f64],
    caps: &[u64],
    replicas: u64,
    config: EngineConfig,
    master_seed: u64,
) -> Result<Vec<Vec<Overshoot>>, ExperimentError> {
    if z_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Config("z_grid must be strictly increasing".into()));
    }
    if caps.len() != z_grid.len() {
        return Err(ExperimentError::Config("one cap per level".into()));
    }
    farm(replicas, |r| {
        overshoot_times(spec, calib, z_grid, caps, config, StreamKey::new(master_seed, r, tags::SINGLE))
    })
}

/// Overshoot times for every level and replica, then the scaling fit.
#[allow(clippy::too_many_arguments)]
pub fn overshoot_scaling(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    z_grid: &[f64],
    replicas: u64,
    cap_factor: f64,
    generation_cap: u64,
    config: EngineConfig,
    master_seed: u64,
) -> Result<OvershootReport, ExperimentError> {
    let caps: Vec<u64> =
        z_grid.iter().map(|&z| overshoot_cap(calib, z, cap_factor, generation_cap)).collect();
    let samples = overshoot_samples(spec, calib, z_grid, &caps, replicas, config, master_seed)?;
    let mut rng = StreamKey::new(master_seed, u64::MAX, tags::BOOTSTRAP).rng();
    overshoot_scaling_from_samples(z_grid, samples, &caps, BOOTSTRAP_RESAMPLES, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub x: f64,
    /// Empirical `P(X > x)`.
    pub survival: f64,
    pub exceedances: u64,
    /// `C (1 + theta x_+) e^{-theta x}` with the fitted `C`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub n: u64,
    pub theta: f64,
    pub grid: Vec<TailPoint>,
    /// Minus the least-squares slope of `log P(X > x)` over grid points with
    /// survival at most 1/2 and enough exceedances.
    pub rate: f64,
    pub fit_points: usize,
    /// Smallest constant making the bound hold on the body (survival >= 0.1).
    pub c: f64,
    /// Bound holds at every grid point with enough exceedances.
    pub majorizes: bool,
    pub violations: Vec<f64>,
}

fn bound_shape(theta: f64, x: f64) -> f64 {
    (1.0 + theta * x.max(0.0)) * (-theta * x).exp()
}

/// Survival curve and tail fit of samples of `M_n - m_n`.
pub fn tail_fit_from_samples(n: u64, samples: &[f64], theta: f64) -> Result<TailReport, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::InsufficientTail("no samples".into()));
    }
    let s = sorted(samples);
    let total = s.len() as f64;
    let mut xs = vec![s[0] - 1.0];
    xs.extend(s.iter().copied());
    xs.dedup();
    let mut grid: Vec<TailPoint> = xs
        .iter()
        .map(|&x| {
            let exceedances = (s.len() - s.partition_point(|&v| v <= x)) as u64;
            TailPoint { x, survival: exceedances as f64 / total, exceedances, bound: 0.0 }
        })
        .collect();

    let (fx, fy): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .filter(|p| p.survival <= 0.5 && p.exceedances >= MIN_EXCEEDANCES)
        .map(|p| (p.x, p.survival.ln()))
        .unzip();
    if fx.len() < 3 {
        return Err(ExperimentError::InsufficientTail(format!(
            "{} grid points with survival <= 1/2 and >= {MIN_EXCEEDANCES} exceedances",
            fx.len()
        )));
    }
    let rate = -ols(&fx, &fy).expect("distinct grid points").slope;

    let c = grid
        .iter()
        .filter(|p| p.survival >= 0.1 && p.exceedances >= MIN_EXCEEDANCES)
        .map(|p| p.survival / bound_shape(theta, p.x))
        .fold(0.0, f64::max);
    let mut violations = Vec::new();
    for p in grid.iter_mut() {
        p.bound = c * bound_shape(theta, p.x);
        if p.exceedances >= MIN_EXCEEDANCES && p.survival > p.bound {
            violations.push(p.x);
        }
    }
    Ok(TailReport {
        n,
        theta,
        grid,
        rate,
        fit_points: fx.len(),
        c,
        majorizes: violations.is_empty(),
        violations,
    })
}

/// Tail of `M_n - m_n` over independent replicas.
pub fn tail_fit(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    n: u64,
    replicas: u64,
    config: EngineConfig,
    master_seed: u64,
) -> Result<TailReport, ExperimentError> {
    let m_n = centering(calib, n)?;
    if m_n <= 0.0 {
        return Err(ExperimentError::Config(format!("centering at n={n} is {m_n}, need > 0")));
    }
    let maxima = max_positions(spec, config, 0, &[n], replicas, master_seed)?;
    let samples: Vec<f64> = maxima.column(0).iter().map(|m| m - m_n).collect();
    tail_fit_from_samples(n, &samples, calib.theta_o)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctSummary {
    pub n: u64,
    pub mean: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    /// `[-3/(2 theta) - eps, -1/(2 theta) + eps]`.
    pub window: (f64, f64),
    pub fraction_inside: f64,
}

/// Summary of `(M_n - n kappa'(theta)) / log n` from samples of `M_n`.
pub fn fluct_summary(n: u64, maxima: &[f64], calib: &CalibrationResult, eps: f64) -> FluctSummary {
    let log_n = (n as f64).ln();
    let stat: Vec<f64> = maxima.iter().map(|m| (m - n as f64 * calib.kappa_prime_at) / log_n).collect();
    let (lo, hi) = fluct_bounds(calib);
    let window = (lo - eps, hi + eps);
    let inside = stat.iter().filter(|&&s| s >= window.0 && s <= window.1).count();
    let s = sorted(&stat);
    FluctSummary {
        n,
        mean: mean(&stat),
        q10: quantile_sorted(&s, 0.1),
        q50: quantile_sorted(&s, 0.5),
        q90: quantile_sorted(&s, 0.9),
        window,
        fraction_inside: inside as f64 / stat.len() as f64,
    }
}

pub fn fluctuation_windows(
    spec: &OffspringSpec,
    calib: &CalibrationResult,
    n_grid: &[u64],
    replicas: u64,
    eps: f64,
    config: EngineConfig,
    master_seed: u64,
) -> Result<Vec<FluctSummary>, ExperimentError> {
    if n_grid.len() < 2 || n_grid.iter().any(|&n| n < 30) {
        return Err(ExperimentError::Config("n_grid needs at least 2 points, all >= 30".into()));
    }
    let maxima = max_positions(spec, config, 0, n_grid, replicas, master_seed)?;
    Ok(maxima
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &n)| fluct_summary(n, &maxima.column(i), calib, eps))
        .collect())
}
