//! Tangent-point calibration and the matched-speed constructions.
//!
//! The tangent point `theta_o > 0` solves `theta * kappa'(theta) = kappa(theta)`;
//! `kappa'(theta_o)` is then the asymptotic speed of the right-most particle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offspring::{CountLaw, LogLaplace, OffspringSpec, SpecError, StepLaw};

/// Upper end of the bracket search for `theta`.
pub const THETA_CAP: f64 = 1e3;
/// Bisection stops once the bracket is this narrow, then Newton takes over.
pub const BISECTION_WIDTH: f64 = 1e-6;
pub const MAX_NEWTON_STEPS: usize = 8;
pub const MAX_ITERATIONS: usize = 200;
/// Default residual tolerance for [`solve_theta`].
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Largest red step size tried by [`construct_noncoexistence_pair`].
pub const MAX_RED_JUMP: i64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no tangent point: {0}")]
    NoTangentPoint(String),
    #[error("root solver did not reach residual {tol:e} (best {residual:e}) in {MAX_ITERATIONS} iterations")]
    NonConvergence { tol: f64, residual: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub theta_o: f64,
    pub kappa_at: f64,
    /// Asymptotic speed `kappa'(theta_o)`.
    pub kappa_prime_at: f64,
    pub kappa_double_prime_at: f64,
    /// `|theta_o kappa'(theta_o) - kappa(theta_o)|`.
    pub residual: f64,
}

impl CalibrationResult {
    pub fn speed(&self) -> f64 {
        self.kappa_prime_at
    }
}

/// Outcome of the closed-form existence test for the tangent point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentExistence {
    pub exists: bool,
    /// `lim_{theta -> inf} kappa(theta) - theta * s_max`, i.e. the log of the
    /// expected number of children placed at the largest displacement.
    pub limit: f64,
}

/// A tangent point exists iff the limit is negative (and the process is supercritical).
pub fn theta_exists<L: LogLaplace + ?Sized>(law: &L) -> TangentExistence {
    let (_, limit) = law.top_atom();
    let supercritical = law.kappa(0.0) > 0.0;
    TangentExistence { exists: supercritical && limit < 0.0, limit }
}

fn tangent_gap<L: LogLaplace + ?Sized>(law: &L, theta: f64) -> (f64, f64) {
    let t = law.tilted(theta);
    (theta * t.kappa_prime - t.kappa, theta * t.kappa_double_prime)
}

/// Finds the increasing function's root in `(lo, hi)` by bisection to
/// [`BISECTION_WIDTH`], then guarded Newton; falls back to bisection if Newton stalls.
fn hybrid_root(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64), CalibrationError> {
    let mut iterations = 0;
    let mut best = (0.5 * (lo + hi), f64::INFINITY);
    while hi - lo > BISECTION_WIDTH && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let (v, _) = f(mid);
        if v.abs() < best.1.abs() {
            best = (mid, v);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let mut x = 0.5 * (lo + hi);
    loop {
        let mut newton = 0;
        while newton < MAX_NEWTON_STEPS && iterations < MAX_ITERATIONS {
            let (v, dv) = f(x);
            if v.abs() < best.1.abs() {
                best = (x, v);
            }
            if v.abs() <= tol {
                return Ok((x, v.abs()));
            }
            if v > 0.0 {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
            let next = x - v / dv;
            x = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            newton += 1;
            iterations += 1;
        }
        if iterations >= MAX_ITERATIONS || hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    if best.1.abs() <= tol {
        Ok((best.0, best.1.abs()))
    } else {
        Err(CalibrationError::NonConvergence { tol, residual: best.1.abs() })
    }
}

/// Solves `theta kappa'(theta) = kappa(theta)` on `(0, inf)`.
///
/// `h(theta) = theta kappa' - kappa` is increasing with `h' = theta kappa''`,
/// so the bracket `[0, hi]` is grown geometrically from 1 until `h(hi) > 0`.
pub fn solve_theta<L: LogLaplace + ?Sized>(
    law: &L,
    tol: f64,
) -> Result<CalibrationResult, CalibrationError> {
    let existence = theta_exists(law);
    if !existence.exists {
        return Err(CalibrationError::NoTangentPoint(format!(
            "kappa(0) = {:.6}, limit kappa(theta) - theta*s_max = {:.6} (needs kappa(0) > 0 and limit < 0)",
            law.kappa(0.0),
            existence.limit
        )));
    }
    let mut hi = 1.0;
    while tangent_gap(law, hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > THETA_CAP {
            return Err(CalibrationError::NoTangentPoint(format!(
                "h(theta) still non-positive at theta = {THETA_CAP}"
            )));
        }
    }
    let lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    let (theta, residual) = hybrid_root(|t| tangent_gap(law, t), lo, hi, tol)?;
    let t = law.tilted(theta);
    Ok(CalibrationResult {
        theta_o: theta,
        kappa_at: t.kappa,
        kappa_prime_at: t.kappa_prime,
        kappa_double_prime_at: t.kappa_double_prime,
        residual,
    })
}

/// `m_n = n kappa'(theta_o) - (3 / (2 theta_o)) log n`, defined for `n >= 1`.
pub fn centering(calib: &CalibrationResult, n: u64) -> Result<f64, CalibrationError> {
    if n == 0 {
        return Err(CalibrationError::Precondition("centering needs n >= 1".into()));
    }
    let n = n as f64;
    Ok(n * calib.kappa_prime_at - 1.5 / calib.theta_o * n.ln())
}

/// Smallest `n` from which `m_n` is increasing: the continuous derivative
/// `kappa' - 3/(2 theta n)` is positive for `n > 3 / (2 theta kappa')`.
pub fn centering_monotone_from(calib: &CalibrationResult) -> u64 {
    let threshold = 1.5 / (calib.theta_o * calib.kappa_prime_at);
    (threshold.floor() as u64 + 1).max(1)
}

/// Limiting `(liminf, limsup)` of `(M_n - n kappa'(theta_o)) / log n`.
pub fn fluct_bounds(calib: &CalibrationResult) -> (f64, f64) {
    (-1.5 / calib.theta_o, -0.5 / calib.theta_o)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedMatch {
    pub theta: f64,
    /// `log E[N] = theta phi'(theta) - phi(theta)`, making `theta` the tangent point.
    pub log_count_mean: f64,
}

/// Finds `theta > 0` with `phi'(theta) = x` for the step law and the count
/// mean that turns it into the tangent point of the product spec.
pub fn match_speed(step: &StepLaw, x: f64) -> Result<SpeedMatch, CalibrationError> {
    let s_max = step.max_displacement() as f64;
    if !(x > 0.0 && x < s_max) {
        return Err(CalibrationError::Infeasible(format!(
            "target speed {x} outside (0, {s_max})"
        )));
    }
    let slope = |t: f64| {
        let tl = step.tilted(t);
        (tl.kappa_prime - x, tl.kappa_double_prime)
    };
    if slope(0.0).0 >= 0.0 {
        return Err(CalibrationError::Infeasible(format!(
            "step mean {} already reaches target speed {x}",
            step.kappa_prime(0.0)
        )));
    }
    let mut hi = 1.0;
    while slope(hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > THETA_CAP {
            return Err(CalibrationError::Infeasible(format!(
                "phi'(theta) < {x} for all theta <= {THETA_CAP}"
            )));
        }
    }
    let lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    let (theta, _) = hybrid_root(slope, lo, hi, 1e-14 * x.max(1.0))?;
    let t = step.tilted(theta);
    Ok(SpeedMatch { theta, log_count_mean: theta * t.kappa_prime - t.kappa })
}

/// Two-point law on `{floor(m), ceil(m)}` with mean `m`.
pub fn make_count_law(target_mean: f64, min_count: u64) -> Result<CountLaw, CalibrationError> {
    if min_count < 1 {
        return Err(CalibrationError::Precondition("min_count must be at least 1".into()));
    }
    if !target_mean.is_finite() || target_mean < min_count as f64 {
        return Err(CalibrationError::Infeasible(format!(
            "mean {target_mean} below minimum count {min_count}"
        )));
    }
    let floor = target_mean.floor();
    let frac = target_mean - floor;
    let low = floor as u64;
    if frac == 0.0 {
        return Ok(CountLaw::constant(low)?);
    }
    Ok(CountLaw::new([(low, 1.0 - frac), (low + 1, frac)])?)
}

/// Red/blue product specs with equal speeds and `3 theta_r < theta_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoncoexistencePair {
    pub red: OffspringSpec,
    pub blue: OffspringSpec,
    pub theta_r: f64,
    pub theta_b: f64,
    pub speed: f64,
    /// Red step support `{-M, -1, 1, M}`.
    pub red_jump: i64,
    /// `1/(2 theta_r) - 3/(2 theta_b)`.
    pub gap_constant_2c: f64,
    pub red_calibration: CalibrationResult,
    pub blue_calibration: CalibrationResult,
}

impl NoncoexistencePair {
    /// Re-checks the pair invariants from the stored specs.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let red = solve_theta(&self.red, DEFAULT_TOLERANCE)?;
        let blue = solve_theta(&self.blue, DEFAULT_TOLERANCE)?;
        if 3.0 * red.theta_o >= blue.theta_o {
            return Err(CalibrationError::Infeasible(format!(
                "3 theta_r = {} is not below theta_b = {}",
                3.0 * red.theta_o,
                blue.theta_o
            )));
        }
        if (red.kappa_prime_at - blue.kappa_prime_at).abs() > 1e-10 {
            return Err(CalibrationError::Infeasible(format!(
                "speeds differ: {} vs {}",
                red.kappa_prime_at, blue.kappa_prime_at
            )));
        }
        if self.gap_constant_2c <= 0.0 {
            return Err(CalibrationError::Infeasible("gap constant is not positive".into()));
        }
        Ok(())
    }
}

/// Blue steps uniform on `{-2,-1,1,2}` with `N_b >= 2`; red steps uniform on
/// `{-M,-1,1,M}` for the smallest `M` with `phi_r'(theta_b/3) > kappa_b'(theta_b)`,
/// red count mean set by `log E[N_r] = theta_r phi_r'(theta_r) - phi_r(theta_r)`.
pub fn construct_noncoexistence_pair(
    blue_count_mean: f64,
) -> Result<NoncoexistencePair, CalibrationError> {
    if !(blue_count_mean > 2.0 && blue_count_mean < 4.0) {
        return Err(CalibrationError::Precondition(format!(
            "blue count mean {blue_count_mean} must lie in (2, 4)"
        )));
    }
    let blue = OffspringSpec::product(
        make_count_law(blue_count_mean, 2)?,
        StepLaw::uniform(&[-2, -1, 1, 2])?,
    );
    let blue_calibration = solve_theta(&blue, DEFAULT_TOLERANCE)?;
    let theta_b = blue_calibration.theta_o;
    let speed = blue_calibration.kappa_prime_at;

    let (red_jump, red_step) = (2..=MAX_RED_JUMP)
        .map(|m| (m, StepLaw::uniform(&[-m, -1, 1, m]).expect("uniform law")))
        .find(|(_, step)| step.kappa_prime(theta_b / 3.0) > speed)
        .ok_or_else(|| {
            CalibrationError::Infeasible(format!(
                "no M <= {MAX_RED_JUMP} gives phi_r'(theta_b/3) > {speed}"
            ))
        })?;
    let matched = match_speed(&red_step, speed)?;
    let red = OffspringSpec::product(make_count_law(matched.log_count_mean.exp(), 1)?, red_step);
    let red_calibration = solve_theta(&red, DEFAULT_TOLERANCE)?;

    let theta_r = red_calibration.theta_o;
    let pair = NoncoexistencePair {
        red,
        blue,
        theta_r,
        theta_b,
        speed,
        red_jump,
        gap_constant_2c: 0.5 / theta_r - 1.5 / theta_b,
        red_calibration,
        blue_calibration,
    };
    pair.validate()?;
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a3_ok: bool,
    pub a1_diagnostic: String,
    pub a2_diagnostic: String,
    pub a3_diagnostic: String,
    pub w_moment_note: String,
    pub calibration: Option<CalibrationResult>,
}

/// Checks non-triviality/no extinction, the tangent condition, and the moment
/// conditions (automatic for bounded count and support).
pub fn check_assumptions(spec: &OffspringSpec) -> AssumptionReport {
    let totals = spec.total_count_law();
    let p_zero: f64 = totals.iter().filter(|a| a.0 == 0).map(|a| a.1).sum();
    let p_one: f64 = totals.iter().filter(|a| a.0 == 1).map(|a| a.1).sum();
    let concentrated = concentrated_mass(spec);
    let mut problems = Vec::new();
    if concentrated.1 >= 1.0 - 1e-12 {
        problems.push(format!("all mass sits at displacement {}", concentrated.0));
    }
    if p_zero > 0.0 {
        problems.push(format!("P(no children) = {p_zero}"));
    }
    if p_one >= 1.0 - 1e-12 {
        problems.push("P(exactly one child) = 1".to_string());
    }
    let a1_ok = problems.is_empty();
    let a1_diagnostic = if a1_ok {
        format!(
            "non-trivial: max single-site concentration {:.6}, P(no children) = 0, P(one child) = {p_one:.6}",
            concentrated.1
        )
    } else {
        problems.join("; ")
    };

    let (a2_ok, a2_diagnostic, calibration) = match solve_theta(spec, DEFAULT_TOLERANCE) {
        Ok(c) if c.kappa_prime_at > 0.0 => (
            true,
            format!("theta = {:.12}, kappa'(theta) = {:.12}", c.theta_o, c.kappa_prime_at),
            Some(c),
        ),
        Ok(c) => (false, format!("kappa'(theta) = {} is not positive", c.kappa_prime_at), Some(c)),
        Err(e) => (false, e.to_string(), None),
    };

    let bounded = spec.max_children() < u64::MAX && spec.support_bound() < i64::MAX;
    let a3_diagnostic = if bounded {
        format!(
            "at most {} children with |displacement| <= {}",
            spec.max_children(),
            spec.support_bound()
        )
    } else {
        "unbounded law".to_string()
    };
    AssumptionReport {
        a1_ok,
        a2_ok,
        a3_ok: bounded,
        a1_diagnostic,
        a2_diagnostic,
        a3_diagnostic,
        w_moment_note: "bounded support and bounded count => W, W-bar bounded, so both moment conditions hold"
            .to_string(),
        calibration,
    }
}

/// Largest probability that all children sit on one common displacement.
fn concentrated_mass(spec: &OffspringSpec) -> (i64, f64) {
    match spec {
        OffspringSpec::Product { count, step } => step
            .atoms()
            .iter()
            .map(|&(d, p)| {
                let mass: f64 = count.atoms().iter().map(|&(n, q)| q * p.powi(n as i32)).sum();
                (d, mass)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0)),
        OffspringSpec::General(g) => {
            let mut best = (0, 0.0);
            for (sample, _) in g.outcomes() {
                if let [(d, _)] = sample.points() {
                    let mass: f64 = g
                        .outcomes()
                        .iter()
                        .filter(|(s, _)| matches!(s.points(), [(e, _)] if e == d))
                        .map(|o| o.1)
                        .sum();
                    if mass > best.1 {
                        best = (*d, mass);
                    }
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm1(mean: f64) -> OffspringSpec {
        OffspringSpec::product(make_count_law(mean, 1).unwrap(), StepLaw::uniform(&[-1, 1]).unwrap())
    }

    /// Plain bisection on `theta tanh(theta) = log m + log cosh(theta)`.
    fn bisection_oracle(mean: f64) -> f64 {
        let h = |t: f64| t * t.tanh() - mean.ln() - t.cosh().ln();
        let (mut lo, mut hi) = (1e-9, 50.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn existence_limits() {
        let blue = OffspringSpec::product(
            CountLaw::constant(3).unwrap(),
            StepLaw::uniform(&[-2, -1, 1, 2]).unwrap(),
        );
        let e = theta_exists(&blue);
        assert!(e.exists);
        assert!((e.limit - (3f64.ln() - 4f64.ln())).abs() < 1e-14);

        let e = theta_exists(&pm1(2.0));
        assert!(!e.exists);
        assert!(e.limit.abs() < 1e-15);

        let e = theta_exists(&pm1(1.5));
        assert!(e.exists);
        assert!((e.limit - (0.75f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn solve_theta_matches_oracle() {
        let c = solve_theta(&pm1(1.5), DEFAULT_TOLERANCE).unwrap();
        assert!((c.theta_o - bisection_oracle(1.5)).abs() < 1e-9);
        assert!((c.theta_o - 1.1966403094908453).abs() < 1e-9);
        assert!((c.kappa_prime_at - c.theta_o.tanh()).abs() < 1e-14);
        assert!((c.kappa_prime_at - 0.8326269598360458).abs() < 1e-9);
        assert!(c.residual <= 1e-12);
        assert!(c.kappa_double_prime_at > 0.0);
    }

    #[test]
    fn blue_theta_tight_residual() {
        let blue = OffspringSpec::product(
            CountLaw::constant(3).unwrap(),
            StepLaw::uniform(&[-2, -1, 1, 2]).unwrap(),
        );
        let c = solve_theta(&blue, DEFAULT_TOLERANCE).unwrap();
        assert!(c.residual < 1e-12);
        assert!((c.theta_o - 2.424719887117166).abs() < 1e-9);
    }

    #[test]
    fn critical_limit_has_no_tangent() {
        assert!(matches!(
            solve_theta(&pm1(2.0), DEFAULT_TOLERANCE),
            Err(CalibrationError::NoTangentPoint(_))
        ));
    }

    #[test]
    fn centering_values() {
        let c = solve_theta(&pm1(1.5), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(centering(&c, 1).unwrap(), c.kappa_prime_at);
        assert!(centering(&c, 0).is_err());
        let n = (2.0 * c.theta_o).exp().round() as u64;
        let expected = n as f64 * c.kappa_prime_at - 1.5 / c.theta_o * (n as f64).ln();
        assert!((centering(&c, n).unwrap() - expected).abs() < 1e-12);
        // log(e^{2 theta}) = 2 theta gives exactly 3/theta before rounding n
        let exact = (2.0 * c.theta_o).exp();
        let m = exact * c.kappa_prime_at - 1.5 / c.theta_o * exact.ln();
        assert!((m - (exact * c.kappa_prime_at - 3.0)).abs() < 1e-12);
        let n0 = centering_monotone_from(&c);
        for n in n0..n0 + 200 {
            assert!(centering(&c, n + 1).unwrap() > centering(&c, n).unwrap());
        }
    }

    #[test]
    fn match_speed_reproduces_pair() {
        let step = StepLaw::uniform(&[-1, 1]).unwrap();
        let c = solve_theta(&pm1(1.5), DEFAULT_TOLERANCE).unwrap();
        let m = match_speed(&step, c.kappa_prime_at).unwrap();
        assert!((m.theta - c.theta_o).abs() < 1e-6);
        assert!((m.log_count_mean - 1.5f64.ln()).abs() < 1e-6);

        let m = match_speed(&step, 0.832).unwrap();
        assert!((m.theta - 1.1945997829154083).abs() < 1e-9);
        assert!((m.log_count_mean - 0.40471550272214993).abs() < 1e-9);

        let tiny = match_speed(&step, 1e-6).unwrap();
        assert!(tiny.theta < 1e-5 && tiny.log_count_mean > 0.0 && tiny.log_count_mean < 1e-10);

        assert!(matches!(match_speed(&step, 1.0), Err(CalibrationError::Infeasible(_))));
        assert!(matches!(match_speed(&step, -0.1), Err(CalibrationError::Infeasible(_))));
    }

    #[test]
    fn count_law_two_point() {
        assert_eq!(make_count_law(3.0, 2).unwrap(), CountLaw::constant(3).unwrap());
        assert_eq!(make_count_law(1.5, 1).unwrap().atoms(), &[(1, 0.5), (2, 0.5)]);
        let m = 0.7f64.exp();
        let law = make_count_law(m, 2).unwrap();
        assert_eq!(law.atoms()[0].0, 2);
        assert!((law.atoms()[0].1 - 0.9862472925295235).abs() < 1e-12);
        assert!((law.atoms()[1].1 - 0.013752707470476522).abs() < 1e-12);
        assert!((law.mean() - m).abs() < 1e-12);
        assert!(matches!(make_count_law(1.5, 2), Err(CalibrationError::Infeasible(_))));
    }

    #[test]
    fn pair_construction() {
        let pair = construct_noncoexistence_pair(3.0).unwrap();
        assert!(3.0 * pair.theta_r < pair.theta_b);
        assert_eq!(pair.red_jump, 3);
        assert!((pair.theta_r - 0.473_023_254_514_160_8).abs() < 1e-8);
        assert!((pair.gap_constant_2c - 0.4384023256552231).abs() < 1e-8);
        // independent re-check of both tangent residuals
        for (spec, theta) in [(&pair.red, pair.theta_r), (&pair.blue, pair.theta_b)] {
            assert!((theta * spec.kappa_prime(theta) - spec.kappa(theta)).abs() < 1e-10);
        }
        assert!((pair.red.kappa_prime(pair.theta_r) - pair.blue.kappa_prime(pair.theta_b)).abs() <= 1e-10);
        assert!(construct_noncoexistence_pair(4.0).is_err());
        assert!(construct_noncoexistence_pair(2.0).is_err());
    }

    #[test]
    fn fluctuation_constants() {
        let unit = CalibrationResult {
            theta_o: 1.0,
            kappa_at: 1.0,
            kappa_prime_at: 1.0,
            kappa_double_prime_at: 1.0,
            residual: 0.0,
        };
        assert_eq!(fluct_bounds(&unit), (-1.5, -0.5));
        let c = solve_theta(&pm1(1.5), DEFAULT_TOLERANCE).unwrap();
        let (lo, hi) = fluct_bounds(&c);
        assert!((lo + 1.2535095033178602).abs() < 1e-9);
        assert!((hi + 0.4178365011059534).abs() < 1e-9);
        assert!(lo < hi && hi < 0.0);
    }

    #[test]
    fn assumption_reports() {
        let single = OffspringSpec::product(
            CountLaw::constant(1).unwrap(),
            StepLaw::uniform(&[-1, 1]).unwrap(),
        );
        assert!(!check_assumptions(&single).a1_ok);

        let r = check_assumptions(&pm1(2.0));
        assert!(r.a1_ok && !r.a2_ok && r.a3_ok);

        let pair = construct_noncoexistence_pair(3.0).unwrap();
        for spec in [&pair.red, &pair.blue] {
            let r = check_assumptions(spec);
            assert!(r.a1_ok && r.a2_ok && r.a3_ok, "{r:?}");
        }

        let frozen = OffspringSpec::product(CountLaw::constant(2).unwrap(), StepLaw::dirac(1));
        assert!(!check_assumptions(&frozen).a1_ok);
    }
}
