//! Exact binomial and multinomial variates for aggregate transitions.
//!
//! Below the configured trial threshold binomials are drawn by inversion
//! (from zero when the mean is small, otherwise by a chop-down search that
//! starts at the mode). Above it the BTPE sampler from `rand_distr` is used.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Default trial count above which the large-count sampler takes over.
pub const DEFAULT_EXACT_THRESHOLD: u64 = 100_000;

/// Mean below which inversion starts from zero instead of the mode.
const ZERO_START_MEAN: f64 = 30.0;
const TABLE_SIZE: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_SIZE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..TABLE_SIZE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(k!)`: tabulated for small `k`, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < TABLE_SIZE {
        return ln_factorial_table()[k as usize];
    }
    let x = k as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (std::f64::consts::TAU * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Binomial(n, p) variate.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64, threshold: u64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    if trials >= threshold {
        return Binomial::new(trials, p).expect("p in (0, 1)").sample(rng);
    }
    let (small, flipped) = if p > 0.5 { (1.0 - p, true) } else { (p, false) };
    let x = if trials as f64 * small < ZERO_START_MEAN {
        inversion_from_zero(rng, trials, small)
    } else {
        inversion_from_mode(rng, trials, small)
    };
    if flipped {
        trials - x
    } else {
        x
    }
}

fn inversion_from_zero<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    let q = 1.0 - p;
    let ratio = p / q;
    let f0 = (n as f64 * (-p).ln_1p()).exp();
    loop {
        let mut u: f64 = rng.random();
        let mut f = f0;
        let mut k = 0u64;
        loop {
            if u < f {
                return k;
            }
            u -= f;
            if k == n || f == 0.0 && k as f64 > n as f64 * p {
                break;
            }
            f *= (n - k) as f64 / (k + 1) as f64 * ratio;
            k += 1;
        }
    }
}

/// Chop-down search over the support in the order mode, mode+1, mode-1, ...
/// Any fixed visiting order inverts the distribution exactly.
fn inversion_from_mode<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    let q = 1.0 - p;
    let ratio = p / q;
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let ln_mode = ln_factorial(n) - ln_factorial(mode) - ln_factorial(n - mode)
        + mode as f64 * p.ln()
        + (n - mode) as f64 * (-p).ln_1p();
    let f_mode = ln_mode.exp();
    loop {
        let mut u: f64 = rng.random();
        u -= f_mode;
        if u < 0.0 {
            return mode;
        }
        let (mut lo, mut hi) = (mode, mode);
        let (mut f_lo, mut f_hi) = (f_mode, f_mode);
        loop {
            if hi < n {
                f_hi *= (n - hi) as f64 / (hi + 1) as f64 * ratio;
                hi += 1;
                u -= f_hi;
                if u < 0.0 {
                    return hi;
                }
            }
            if lo > 0 {
                f_lo *= lo as f64 / (n - lo + 1) as f64 / ratio;
                lo -= 1;
                u -= f_lo;
                if u < 0.0 {
                    return lo;
                }
            }
            // leftover mass is rounding error; redraw
            let exhausted = (hi == n || f_hi == 0.0) && (lo == 0 || f_lo == 0.0);
            if exhausted {
                break;
            }
        }
    }
}

/// Multinomial counts by sequential conditional binomials, written into `out`.
/// The outputs always sum to `trials`.
pub fn multinomial_into<R: Rng + ?Sized>(
    rng: &mut R,
    trials: u64,
    probabilities: &[f64],
    threshold: u64,
    out: &mut [u64],
) {
    debug_assert_eq!(probabilities.len(), out.len());
    let mut remaining = trials;
    let mut mass = 1.0f64;
    let Some((last, head)) = out.split_last_mut() else {
        return;
    };
    for (slot, &p) in head.iter_mut().zip(probabilities) {
        if remaining == 0 {
            *slot = 0;
            continue;
        }
        let conditional = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = binomial(rng, remaining, conditional, threshold);
        *slot = x;
        remaining -= x;
        mass -= p;
    }
    *last = remaining;
}

/// Allocating form of [`multinomial_into`].
pub fn multinomial_counts<R: Rng + ?Sized>(
    rng: &mut R,
    trials: u64,
    probabilities: &[f64],
    threshold: u64,
) -> Vec<u64> {
    let mut out = vec![0; probabilities.len()];
    multinomial_into(rng, trials, probabilities, threshold, &mut out);
    out
}
