//! Finite offspring point processes on the integer lattice.
//!
//! An offspring law describes the random multiset of child displacements
//! produced by one particle. Two shapes are supported: a product form, where
//! an independent count `N` is paired with i.i.d. steps, and a general finite
//! law over a list of outcome multisets.
//!
//! Everything the calibration layer needs depends only on the intensity
//! measure `d -> E[#children at d]`, so the log-Laplace calculus is written
//! once against that measure (see [`LogLaplace`]).

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of every probability list.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("law has no atoms")]
    Empty,
    #[error("probabilities sum to {sum}, expected 1 within {PROBABILITY_TOLERANCE:e}")]
    ProbabilitySum { sum: f64 },
    #[error("probability {p} is outside (0, 1]")]
    InvalidProbability { p: f64 },
    #[error("offspring count must be at least 1 (no extinction), got {count}")]
    ZeroCount { count: u64 },
    #[error("outcome multiset is empty")]
    EmptyOutcome,
    #[error("projection direction has norm {norm}, expected 1")]
    NonUnitDirection { norm: f64 },
    #[error("displacement has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed spec document: {0}")]
    Document(String),
}

fn check_probabilities(probs: impl Iterator<Item = f64>) -> Result<(), SpecError> {
    let mut sum = 0.0;
    let mut any = false;
    for p in probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(SpecError::InvalidProbability { p });
        }
        sum += p;
        any = true;
    }
    if !any {
        return Err(SpecError::Empty);
    }
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(SpecError::ProbabilitySum { sum });
    }
    Ok(())
}

/// Draws an index from a list of weights that sums to (approximately) one.
fn pick_index<R: Rng + ?Sized>(rng: &mut R, probs: impl ExactSizeIterator<Item = f64>) -> usize {
    let last = probs.len() - 1;
    let mut u: f64 = rng.random();
    for (i, p) in probs.enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    last
}

/// Distribution of a single step on `{-M, ..., M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLaw {
    atoms: Vec<(i64, f64)>,
    support_bound: i64,
    symmetric: bool,
}

impl StepLaw {
    /// Builds a step law; repeated displacements are merged and atoms sorted.
    pub fn new(atoms: impl IntoIterator<Item = (i64, f64)>) -> Result<Self, SpecError> {
        let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
        let mut raw = Vec::new();
        for (d, p) in atoms {
            raw.push(p);
            *merged.entry(d).or_insert(0.0) += p;
        }
        check_probabilities(raw.into_iter())?;
        let atoms: Vec<(i64, f64)> = merged.into_iter().collect();
        let support_bound = atoms.iter().map(|(d, _)| d.abs()).max().unwrap_or(0);
        let symmetric = atoms.iter().all(|&(d, p)| {
            atoms
                .iter()
                .any(|&(e, q)| e == -d && (p - q).abs() <= PROBABILITY_TOLERANCE)
        });
        Ok(StepLaw { atoms, support_bound, symmetric })
    }

    /// Uniform law over the given displacements.
    pub fn uniform(displacements: &[i64]) -> Result<Self, SpecError> {
        let p = 1.0 / displacements.len() as f64;
        Self::new(displacements.iter().map(|&d| (d, p)))
    }

    /// Point mass at `d`.
    pub fn dirac(d: i64) -> Self {
        Self::new([(d, 1.0)]).expect("point mass is a valid law")
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    /// Largest absolute displacement `M`.
    pub fn support_bound(&self) -> i64 {
        self.support_bound
    }

    pub fn max_displacement(&self) -> i64 {
        self.atoms.last().map(|a| a.0).unwrap_or(0)
    }

    pub fn min_displacement(&self) -> i64 {
        self.atoms.first().map(|a| a.0).unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn probability_of(&self, d: i64) -> f64 {
        self.atoms.iter().find(|a| a.0 == d).map(|a| a.1).unwrap_or(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.atoms[pick_index(rng, self.atoms.iter().map(|a| a.1))].0
    }
}

/// Law of the number of children, supported on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    atoms: Vec<(u64, f64)>,
    mean: f64,
}

impl CountLaw {
    pub fn new(atoms: impl IntoIterator<Item = (u64, f64)>) -> Result<Self, SpecError> {
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        let mut raw = Vec::new();
        for (n, p) in atoms {
            if n == 0 {
                return Err(SpecError::ZeroCount { count: 0 });
            }
            raw.push(p);
            *merged.entry(n).or_insert(0.0) += p;
        }
        check_probabilities(raw.into_iter())?;
        let atoms: Vec<(u64, f64)> = merged.into_iter().collect();
        let mean = atoms.iter().map(|&(n, p)| n as f64 * p).sum();
        Ok(CountLaw { atoms, mean })
    }

    /// `N` identically equal to `n`.
    pub fn constant(n: u64) -> Result<Self, SpecError> {
        Self::new([(n, 1.0)])
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_count(&self) -> u64 {
        self.atoms.last().map(|a| a.0).unwrap_or(0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.atoms[pick_index(rng, self.atoms.iter().map(|a| a.1))].0
    }
}

/// A realized offspring configuration: displacement -> multiplicity,
/// kept sorted by displacement with no zero entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PointSample {
    points: Vec<(i64, u64)>,
}

impl PointSample {
    pub fn from_displacements(displacements: impl IntoIterator<Item = i64>) -> Self {
        Self::from_multiplicities(displacements.into_iter().map(|d| (d, 1)))
    }

    pub fn from_multiplicities(entries: impl IntoIterator<Item = (i64, u64)>) -> Self {
        let mut map: BTreeMap<i64, u64> = BTreeMap::new();
        for (d, m) in entries {
            if m > 0 {
                *map.entry(d).or_insert(0) += m;
            }
        }
        PointSample { points: map.into_iter().collect() }
    }

    pub fn points(&self) -> &[(i64, u64)] {
        &self.points
    }

    pub fn total(&self) -> u64 {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn multiplicity(&self, d: i64) -> u64 {
        self.points.iter().find(|p| p.0 == d).map(|p| p.1).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exponential sum `sum_j exp(theta * xi_j)`.
    pub fn exp_sum(&self, theta: f64) -> f64 {
        self.points.iter().map(|&(d, m)| m as f64 * (theta * d as f64).exp()).sum()
    }
}

impl Serialize for PointSample {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.points.len()))?;
        for (d, m) in &self.points {
            map.serialize_entry(&d.to_string(), m)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PointSample {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SampleVisitor;
        impl<'de> Visitor<'de> for SampleVisitor {
            type Value = PointSample;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from integer displacement to multiplicity")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<PointSample, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, m)) = access.next_entry::<String, u64>()? {
                    let d: i64 = k
                        .trim()
                        .parse()
                        .map_err(|_| de::Error::custom(format!("bad displacement key {k:?}")))?;
                    entries.push((d, m));
                }
                Ok(PointSample::from_multiplicities(entries))
            }
        }
        deserializer.deserialize_map(SampleVisitor)
    }
}

/// General finite law: a list of outcome multisets with probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralLaw {
    outcomes: Vec<(PointSample, f64)>,
    intensity: Vec<(i64, f64)>,
}

impl GeneralLaw {
    /// Builds a canonical law: equal outcomes merged, sorted by encoding.
    pub fn new(outcomes: impl IntoIterator<Item = (PointSample, f64)>) -> Result<Self, SpecError> {
        let mut merged: BTreeMap<PointSample, f64> = BTreeMap::new();
        let mut raw = Vec::new();
        for (sample, p) in outcomes {
            if sample.is_empty() {
                return Err(SpecError::EmptyOutcome);
            }
            raw.push(p);
            *merged.entry(sample).or_insert(0.0) += p;
        }
        check_probabilities(raw.into_iter())?;
        let outcomes: Vec<(PointSample, f64)> = merged.into_iter().collect();
        let mut intensity: BTreeMap<i64, f64> = BTreeMap::new();
        for (sample, p) in &outcomes {
            for &(d, m) in sample.points() {
                *intensity.entry(d).or_insert(0.0) += p * m as f64;
            }
        }
        Ok(GeneralLaw { outcomes, intensity: intensity.into_iter().collect() })
    }

    pub fn outcomes(&self) -> &[(PointSample, f64)] {
        &self.outcomes
    }

    /// Intensity measure `d -> E[Xi({d})]`.
    pub fn intensity(&self) -> &[(i64, f64)] {
        &self.intensity
    }
}

/// Offspring point-process law of one particle.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringSpec {
    /// Independent count `N` with `N` i.i.d. steps.
    Product { count: CountLaw, step: StepLaw },
    /// Arbitrary finite list of outcome multisets.
    General(GeneralLaw),
}

impl OffspringSpec {
    pub fn product(count: CountLaw, step: StepLaw) -> Self {
        OffspringSpec::Product { count, step }
    }

    /// Expected number of children `E[Xi(R)]`.
    pub fn mean_offspring(&self) -> f64 {
        match self {
            OffspringSpec::Product { count, .. } => count.mean(),
            OffspringSpec::General(g) => g.intensity.iter().map(|a| a.1).sum(),
        }
    }

    /// Largest displacement any child can take.
    pub fn max_displacement(&self) -> i64 {
        match self {
            OffspringSpec::Product { step, .. } => step.max_displacement(),
            OffspringSpec::General(g) => g.intensity.last().map(|a| a.0).unwrap_or(0),
        }
    }

    pub fn min_displacement(&self) -> i64 {
        match self {
            OffspringSpec::Product { step, .. } => step.min_displacement(),
            OffspringSpec::General(g) => g.intensity.first().map(|a| a.0).unwrap_or(0),
        }
    }

    /// Largest absolute displacement.
    pub fn support_bound(&self) -> i64 {
        self.max_displacement().abs().max(self.min_displacement().abs())
    }

    /// Largest possible number of children.
    pub fn max_children(&self) -> u64 {
        match self {
            OffspringSpec::Product { count, .. } => count.max_count(),
            OffspringSpec::General(g) => {
                g.outcomes.iter().map(|o| o.0.total()).max().unwrap_or(0)
            }
        }
    }

    /// Distribution of the total number of children `Xi(R)`.
    pub fn total_count_law(&self) -> Vec<(u64, f64)> {
        match self {
            OffspringSpec::Product { count, .. } => count.atoms().to_vec(),
            OffspringSpec::General(g) => {
                let mut map: BTreeMap<u64, f64> = BTreeMap::new();
                for (s, p) in &g.outcomes {
                    *map.entry(s.total()).or_insert(0.0) += p;
                }
                map.into_iter().collect()
            }
        }
    }

    /// Draws one realization of the offspring point process.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointSample {
        match self {
            OffspringSpec::Product { count, step } => {
                let n = count.sample(rng);
                PointSample::from_displacements((0..n).map(|_| step.sample(rng)))
            }
            OffspringSpec::General(g) => {
                let i = pick_index(rng, g.outcomes.iter().map(|o| o.1));
                g.outcomes[i].0.clone()
            }
        }
    }

    pub fn to_document(&self) -> SpecDocument {
        match self {
            OffspringSpec::Product { count, step } => SpecDocument {
                form: SpecForm::Product,
                count: Some(count.atoms().to_vec()),
                step: Some(step.atoms().to_vec()),
                outcomes: None,
            },
            OffspringSpec::General(g) => SpecDocument {
                form: SpecForm::General,
                count: None,
                step: None,
                outcomes: Some(g.outcomes.clone()),
            },
        }
    }

    pub fn from_document(doc: SpecDocument) -> Result<Self, SpecError> {
        match doc.form {
            SpecForm::Product => {
                let count = doc
                    .count
                    .ok_or_else(|| SpecError::Document("product form needs `count`".into()))?;
                let step = doc
                    .step
                    .ok_or_else(|| SpecError::Document("product form needs `step`".into()))?;
                Ok(OffspringSpec::Product { count: CountLaw::new(count)?, step: StepLaw::new(step)? })
            }
            SpecForm::General => {
                let outcomes = doc
                    .outcomes
                    .ok_or_else(|| SpecError::Document("general form needs `outcomes`".into()))?;
                Ok(OffspringSpec::General(GeneralLaw::new(outcomes)?))
            }
        }
    }

    /// Canonical JSON encoding; identical specs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("spec document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let doc: SpecDocument =
            serde_json::from_str(text).map_err(|e| SpecError::Document(e.to_string()))?;
        Self::from_document(doc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecForm {
    Product,
    General,
}

/// On-disk form of an [`OffspringSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub form: SpecForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<Vec<(u64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Vec<(i64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<(PointSample, f64)>>,
}

/// Value, first and second derivative of a log-Laplace transform at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tilted {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub kappa_double_prime: f64,
}

/// Evaluates `offset + log sum_i w_i e^{theta d_i}` and its tilted moments,
/// with `atoms` given as `(d_i, log w_i)`. Log-sum-exp keeps large `|theta|` finite.
fn tilt(offset: f64, atoms: &[(f64, f64)], theta: f64) -> Tilted {
    let top = atoms
        .iter()
        .map(|&(d, lw)| lw + theta * d)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for &(d, lw) in atoms {
        let w = (lw + theta * d - top).exp();
        s0 += w;
        s1 += w * d;
    }
    let mean = s1 / s0;
    let mut s2 = 0.0;
    for &(d, lw) in atoms {
        let w = (lw + theta * d - top).exp();
        s2 += w * (d - mean) * (d - mean);
    }
    Tilted { kappa: offset + top + s0.ln(), kappa_prime: mean, kappa_double_prime: s2 / s0 }
}

/// Log-Laplace calculus of an offspring point process,
/// `kappa(theta) = log E[sum_j e^{theta xi_j}]`.
pub trait LogLaplace {
    /// Additive constant and atoms `(displacement, log weight)` such that
    /// `kappa(theta) = offset + log sum exp(log weight + theta * displacement)`.
    fn log_weights(&self) -> (f64, Vec<(f64, f64)>);

    fn tilted(&self, theta: f64) -> Tilted {
        let (offset, atoms) = self.log_weights();
        tilt(offset, &atoms, theta)
    }

    fn kappa(&self, theta: f64) -> f64 {
        self.tilted(theta).kappa
    }

    fn kappa_prime(&self, theta: f64) -> f64 {
        self.tilted(theta).kappa_prime
    }

    fn kappa_double_prime(&self, theta: f64) -> f64 {
        self.tilted(theta).kappa_double_prime
    }

    /// Largest displacement with positive intensity and `log E[Xi({s_max})]`.
    fn top_atom(&self) -> (f64, f64) {
        let (offset, atoms) = self.log_weights();
        let &(d, lw) = atoms
            .iter()
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("laws have at least one atom");
        (d, offset + lw)
    }
}

impl LogLaplace for StepLaw {
    /// This is `phi(theta) = log E[e^{theta xi}]` of a single step.
    fn log_weights(&self) -> (f64, Vec<(f64, f64)>) {
        (0.0, self.atoms.iter().map(|&(d, p)| (d as f64, p.ln())).collect())
    }
}

impl LogLaplace for OffspringSpec {
    fn log_weights(&self) -> (f64, Vec<(f64, f64)>) {
        match self {
            // log E[N] + phi(theta), by independence of N and the steps
            OffspringSpec::Product { count, step } => (count.mean().ln(), step.log_weights().1),
            OffspringSpec::General(g) => {
                (0.0, g.intensity.iter().map(|&(d, w)| (d as f64, w.ln())).collect())
            }
        }
    }
}

impl LogLaplace for ProjectedLaw {
    fn log_weights(&self) -> (f64, Vec<(f64, f64)>) {
        (0.0, self.intensity.iter().map(|&(d, w)| (d, w.ln())).collect())
    }
}

/// One outcome on `Z^d`: displacement vectors with multiplicities.
pub type VectorOutcome = Vec<(Vec<i64>, u64)>;

/// Offspring law on `Z^d`: outcomes are multisets of integer vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorLaw {
    dim: usize,
    outcomes: Vec<(VectorOutcome, f64)>,
}

impl VectorLaw {
    pub fn new(dim: usize, outcomes: Vec<(VectorOutcome, f64)>) -> Result<Self, SpecError> {
        for (points, _) in &outcomes {
            if points.iter().all(|p| p.1 == 0) {
                return Err(SpecError::EmptyOutcome);
            }
            if let Some(bad) = points.iter().find(|p| p.0.len() != dim) {
                return Err(SpecError::DimensionMismatch { expected: dim, got: bad.0.len() });
            }
        }
        check_probabilities(outcomes.iter().map(|o| o.1))?;
        Ok(VectorLaw { dim, outcomes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Real-valued finite law obtained by projecting a [`VectorLaw`] on a direction.
/// Feeds calibration only; the lattice engine needs integer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLaw {
    outcomes: Vec<(Vec<(f64, u64)>, f64)>,
    intensity: Vec<(f64, f64)>,
}

impl ProjectedLaw {
    pub fn outcomes(&self) -> &[(Vec<(f64, u64)>, f64)] {
        &self.outcomes
    }

    pub fn intensity(&self) -> &[(f64, f64)] {
        &self.intensity
    }

    pub fn total_mass(&self) -> f64 {
        self.outcomes.iter().map(|o| o.1).sum()
    }
}

/// Merges sorted `(key, value)` pairs whose keys agree within `tol`.
fn merge_close(mut pairs: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (k, v) in pairs {
        match out.last_mut() {
            Some(last) if (k - last.0).abs() <= tol => last.1 += v,
            _ => out.push((k, v)),
        }
    }
    out
}

/// Projects every displacement vector `a` onto `<a, e>`; atoms and outcomes
/// whose projections coincide are merged.
pub fn project(law: &VectorLaw, direction: &[f64]) -> Result<ProjectedLaw, SpecError> {
    if direction.len() != law.dim {
        return Err(SpecError::DimensionMismatch { expected: law.dim, got: direction.len() });
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(SpecError::NonUnitDirection { norm });
    }
    let tol = 1e-12;
    let dot = |a: &[i64]| a.iter().zip(direction).map(|(&x, &e)| x as f64 * e).sum::<f64>();

    let mut projected: Vec<(Vec<(f64, u64)>, f64)> = Vec::new();
    for (points, p) in &law.outcomes {
        let atoms = merge_close(
            points.iter().filter(|q| q.1 > 0).map(|(a, m)| (dot(a), *m as f64)).collect(),
            tol,
        );
        let atoms: Vec<(f64, u64)> = atoms.into_iter().map(|(x, m)| (x, m as u64)).collect();
        let same = projected.iter_mut().find(|(other, _)| {
            other.len() == atoms.len()
                && other.iter().zip(&atoms).all(|(a, b)| a.1 == b.1 && (a.0 - b.0).abs() <= tol)
        });
        match same {
            Some(existing) => existing.1 += p,
            None => projected.push((atoms, *p)),
        }
    }
    let intensity = merge_close(
        projected
            .iter()
            .flat_map(|(atoms, p)| atoms.iter().map(move |&(x, m)| (x, p * m as f64)))
            .collect(),
        tol,
    );
    Ok(ProjectedLaw { outcomes: projected, intensity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_pm1(count: CountLaw) -> OffspringSpec {
        OffspringSpec::product(count, StepLaw::uniform(&[-1, 1]).unwrap())
    }

    fn one_and_a_half() -> CountLaw {
        CountLaw::new([(1, 0.5), (2, 0.5)]).unwrap()
    }

    #[test]
    fn step_law_validation() {
        assert_eq!(StepLaw::new(Vec::<(i64, f64)>::new()), Err(SpecError::Empty));
        assert!(matches!(StepLaw::new([(1, 0.5), (2, 0.4)]), Err(SpecError::ProbabilitySum { .. })));
        assert!(matches!(StepLaw::new([(1, 1.5)]), Err(SpecError::InvalidProbability { .. })));
        let law = StepLaw::uniform(&[-2, -1, 1, 2]).unwrap();
        assert!(law.is_symmetric());
        assert_eq!(law.support_bound(), 2);
        assert!(!StepLaw::new([(-1, 0.3), (1, 0.7)]).unwrap().is_symmetric());
        // duplicates merge
        let law = StepLaw::new([(1, 0.25), (1, 0.25), (-1, 0.5)]).unwrap();
        assert_eq!(law.atoms(), &[(-1, 0.5), (1, 0.5)]);
    }

    #[test]
    fn count_law_rejects_extinction() {
        assert_eq!(CountLaw::new([(0, 0.5), (2, 0.5)]), Err(SpecError::ZeroCount { count: 0 }));
        assert_eq!(one_and_a_half().mean(), 1.5);
    }

    #[test]
    fn kappa_at_zero_is_log_mean() {
        let spec = uniform_pm1(CountLaw::constant(3).unwrap());
        assert!((spec.kappa(0.0) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kappa_closed_form_examples() {
        let spec = OffspringSpec::product(
            CountLaw::constant(3).unwrap(),
            StepLaw::uniform(&[-2, -1, 1, 2]).unwrap(),
        );
        let expected = 3f64.ln() + ((1f64.cosh() + 2f64.cosh()) / 2.0).ln();
        assert!((spec.kappa(1.0) - expected).abs() < 1e-14);
        assert!((spec.kappa(1.0) - 2.074166966640184).abs() < 1e-12);

        let spec = uniform_pm1(one_and_a_half());
        // naive log of the exponential sum
        let naive = (0.5 * (1.0f64).exp() + 0.5 * (-1.0f64).exp()).ln() + 1.5f64.ln();
        assert!((spec.kappa(1.0) - naive).abs() < 1e-14);
        assert!((spec.kappa(1.0) - 0.8392459385911916).abs() < 1e-12);
    }

    #[test]
    fn derivatives_at_zero() {
        let spec = OffspringSpec::product(
            CountLaw::constant(3).unwrap(),
            StepLaw::uniform(&[-2, -1, 1, 2]).unwrap(),
        );
        assert!(spec.kappa_prime(0.0).abs() < 1e-15);
        assert!((spec.kappa_double_prime(0.0) - 2.5).abs() < 1e-14);
        let h = 1e-5;
        let fd = (spec.kappa(h) - 2.0 * spec.kappa(0.0) + spec.kappa(-h)) / (h * h);
        assert!((fd - 2.5).abs() < 1e-6 * 100.0, "{fd}");
    }

    #[test]
    fn large_theta_is_finite() {
        let spec = OffspringSpec::product(
            CountLaw::constant(3).unwrap(),
            StepLaw::uniform(&[-40, -1, 1, 40]).unwrap(),
        );
        for theta in [-20.0, 20.0, 500.0] {
            let t = spec.tilted(theta);
            assert!(t.kappa.is_finite() && t.kappa_prime.is_finite());
        }
        assert!((spec.kappa_prime(500.0) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn general_law_matches_product_calculus() {
        // N = 2 with +-1 steps written out as outcome multisets
        let general = OffspringSpec::General(
            GeneralLaw::new([
                (PointSample::from_displacements([-1, -1]), 0.25),
                (PointSample::from_displacements([-1, 1]), 0.5),
                (PointSample::from_displacements([1, 1]), 0.25),
            ])
            .unwrap(),
        );
        let product = uniform_pm1(CountLaw::constant(2).unwrap());
        for theta in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let (a, b) = (general.tilted(theta), product.tilted(theta));
            assert!((a.kappa - b.kappa).abs() < 1e-13);
            assert!((a.kappa_prime - b.kappa_prime).abs() < 1e-13);
            assert!((a.kappa_double_prime - b.kappa_double_prime).abs() < 1e-13);
        }
    }

    #[test]
    fn general_law_canonicalizes() {
        let a = GeneralLaw::new([
            (PointSample::from_displacements([1, -1]), 0.5),
            (PointSample::from_displacements([0]), 0.5),
        ])
        .unwrap();
        let b = GeneralLaw::new([
            (PointSample::from_displacements([0]), 0.25),
            (PointSample::from_displacements([-1, 1]), 0.5),
            (PointSample::from_displacements([0]), 0.25),
        ])
        .unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            GeneralLaw::new([(PointSample::default(), 1.0)]),
            Err(SpecError::EmptyOutcome)
        ));
    }

    #[test]
    fn degenerate_sampler_is_constant() {
        let spec = OffspringSpec::product(CountLaw::constant(1).unwrap(), StepLaw::dirac(0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(spec.sample(&mut rng), PointSample::from_displacements([0]));
        }
    }

    #[test]
    fn two_children_outcome_frequencies() {
        // enumeration: {-1,-1} 1/4, {-1,1} 1/2, {1,1} 1/4
        let spec = uniform_pm1(CountLaw::constant(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000;
        let mut hits = [0u64; 3];
        for _ in 0..draws {
            let s = spec.sample(&mut rng);
            hits[s.multiplicity(1) as usize] += 1;
        }
        for (k, p) in [0.25, 0.5, 0.25].into_iter().enumerate() {
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = hits[k] as f64 / draws as f64;
            assert!((freq - p).abs() < 4.0 * sd, "outcome {k}: {freq} vs {p}");
        }
    }

    #[test]
    fn exponential_sum_mean_matches_kappa() {
        let spec = uniform_pm1(one_and_a_half());
        let theta = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let v = spec.sample(&mut rng).exp_sum(theta);
            s += v;
            s2 += v * v;
        }
        let mean = s / draws as f64;
        let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - spec.kappa(theta).exp()).abs() < 3.0 * se);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let specs = [
            uniform_pm1(one_and_a_half()),
            OffspringSpec::General(
                GeneralLaw::new([
                    (PointSample::from_displacements([-2, 1, 1]), 0.3),
                    (PointSample::from_displacements([0]), 0.7),
                ])
                .unwrap(),
            ),
        ];
        for spec in specs {
            let text = spec.to_json();
            let back = OffspringSpec::from_json(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.to_json(), text);
        }
        let doc = r#"{"form":"general","outcomes":[[{"-1":2},1.0]]}"#;
        let spec = OffspringSpec::from_json(doc).unwrap();
        assert_eq!(spec.mean_offspring(), 2.0);
        assert!(OffspringSpec::from_json(r#"{"form":"product","step":[[1,1.0]]}"#).is_err());
    }

    #[test]
    fn projection_examples() {
        let law = VectorLaw::new(
            2,
            vec![(vec![(vec![1, 0], 1)], 0.5), (vec![(vec![0, 1], 1)], 0.5)],
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let proj = project(&law, &[s, s]).unwrap();
        assert_eq!(proj.outcomes().len(), 1);
        assert_eq!(proj.intensity().len(), 1);
        assert!((proj.intensity()[0].0 - s).abs() < 1e-15);
        assert!((proj.intensity()[0].1 - 1.0).abs() < 1e-15);

        let axis = project(&law, &[1.0, 0.0]).unwrap();
        let atoms: Vec<f64> = axis.intensity().iter().map(|a| a.0).collect();
        assert_eq!(atoms, vec![0.0, 1.0]);
        assert!((axis.total_mass() - 1.0).abs() < 1e-12);

        assert!(matches!(project(&law, &[1.0, 1.0]), Err(SpecError::NonUnitDirection { .. })));
    }
}
