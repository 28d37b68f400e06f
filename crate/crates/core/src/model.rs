//! The misspecified sparse linear bandit environment and query accounting.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, row_vec};
use crate::random::{seeded, standard_normal, SeededRng};

/// Slack allowed on unit-norm checks, since generators normalize in floating point.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// A `k x d` matrix whose rows are the action features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::EmptyFeatureMatrix);
        }
        for i in 0..rows.nrows() {
            let n = rows.row(i).norm();
            if !(n <= 1.0 + NORM_TOLERANCE) {
                return Err(Error::RowNormExceedsOne { row: i, norm: n });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(k * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { what: "feature row", expected: d, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(DMatrix::from_row_slice(k, d, &data))
    }

    pub fn k(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        row_vec(&self.rows, i)
    }

    /// Column restriction `Phi_M`.
    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.rows.select_columns(idx)
    }

    /// Row selection, keeping all columns.
    pub fn select_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.rows.select_rows(idx)
    }
}

/// An `s`-sparse parameter vector with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseParameter {
    coords: Vec<f64>,
    support: Vec<usize>,
}

impl SparseParameter {
    /// Checks that exactly `s` coordinates are nonzero and the norm is at most one.
    pub fn new(coords: Vec<f64>, s: usize) -> Result<Self> {
        let p = Self::embedded(coords);
        if p.support.len() != s {
            return Err(Error::SparsityMismatch { expected: s, found: p.support.len() });
        }
        let n = norm(&p.coords);
        if !(n <= 1.0 + NORM_TOLERANCE) {
            return Err(Error::ParameterNormExceedsOne { norm: n });
        }
        Ok(p)
    }

    /// Takes the sparsity from the vector itself and skips the norm check.
    /// Used by the hard-instance embedding, whose parameter may have norm
    /// above one; see [`BanditInstance::parameter_norm_exceeds_one`].
    pub fn embedded(coords: Vec<f64>) -> Self {
        let support = coords.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        Self { coords, support }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    pub fn d(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Gaussian,
}

/// Reward noise. Only unit-variance Gaussian noise is supported.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub scale: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, scale: 1.0, seed: 0 }
    }

    pub fn gaussian(seed: u64) -> Self {
        Self { kind: NoiseKind::Gaussian, scale: 1.0, seed }
    }

    pub fn is_noisy(&self) -> bool {
        self.kind == NoiseKind::Gaussian
    }
}

/// Features, sparse truth, misspecification and the precomputed reward table.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    features: FeatureMatrix,
    theta_star: SparseParameter,
    misspec: Vec<f64>,
    epsilon: f64,
    noise: NoiseModel,
    rewards: Vec<f64>,
}

impl BanditInstance {
    pub fn new(
        features: FeatureMatrix,
        theta_star: SparseParameter,
        misspec: Vec<f64>,
        epsilon: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("epsilon must be positive, got {epsilon}")));
        }
        if theta_star.d() != features.d() {
            return Err(Error::DimensionMismatch { what: "parameter", expected: features.d(), found: theta_star.d() });
        }
        if misspec.len() != features.k() {
            return Err(Error::DimensionMismatch {
                what: "misspecification vector",
                expected: features.k(),
                found: misspec.len(),
            });
        }
        if let Some((index, &value)) = misspec.iter().enumerate().find(|(_, v)| !(v.abs() <= epsilon)) {
            return Err(Error::MisspecificationExceedsEpsilon { index, value, epsilon });
        }
        let rewards = (0..features.k()).map(|i| dot(&features.row(i), theta_star.coords()) + misspec[i]).collect();
        Ok(Self { features, theta_star, misspec, epsilon, noise, rewards })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn theta_star(&self) -> &SparseParameter {
        &self.theta_star
    }

    pub fn misspec(&self) -> &[f64] {
        &self.misspec
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn k(&self) -> usize {
        self.features.k()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    pub fn s(&self) -> usize {
        self.theta_star.s()
    }

    /// The noiseless reward table. Harness-side only; algorithms go through [`query`].
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn parameter_norm_exceeds_one(&self) -> bool {
        norm(self.theta_star.coords()) > 1.0 + NORM_TOLERANCE
    }

    /// The same instance with a different noise model.
    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub index: usize,
    pub reward: f64,
    pub counter: usize,
}

/// Append-only record of every query a run issues. Also owns the run's
/// noise stream, so two ledgers on the same noisy instance see the same draws.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    entries: Vec<LedgerEntry>,
    noise: Option<SeededRng>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Appends another run's entries, renumbering their counters.
    pub fn merge(&mut self, other: QueryLedger) {
        for e in other.entries {
            let counter = self.entries.len();
            self.entries.push(LedgerEntry { counter, ..e });
        }
    }
}

/// Returns the reward of action `index` and records the query.
pub fn query(instance: &BanditInstance, index: usize, ledger: &mut QueryLedger) -> Result<f64> {
    let k = instance.k();
    if index >= k {
        return Err(Error::IndexOutOfRange { index, len: k });
    }
    let mut reward = instance.rewards[index];
    if instance.noise.is_noisy() {
        let seed = instance.noise.seed;
        let rng = ledger.noise.get_or_insert_with(|| seeded(seed));
        reward += instance.noise.scale * standard_normal(rng);
    }
    let counter = ledger.entries.len();
    ledger.entries.push(LedgerEntry { index, reward, counter });
    Ok(reward)
}

/// Best action by the noiseless reward table, lowest index on ties.
pub fn brute_force_best(instance: &BanditInstance) -> (usize, f64) {
    let mut best = (0, instance.rewards[0]);
    for (i, &r) in instance.rewards.iter().enumerate().skip(1) {
        if r > best.1 {
            best = (i, r);
        }
    }
    best
}

/// `max_a |r_a - <a_L, theta_hat>|` where `theta_hat` lives on the index set `set`.
pub fn uniform_error(instance: &BanditInstance, theta_hat: &[f64], set: &[usize]) -> f64 {
    let m = instance.features.matrix();
    instance
        .rewards
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let pred: f64 = set.iter().zip(theta_hat).map(|(&j, t)| m[(i, j)] * t).sum();
            libm::fabs(r - pred)
        })
        .fold(0.0, f64::max)
}

/// An estimate supported on an explicit index set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub set: Vec<usize>,
    pub theta: Vec<f64>,
}

impl SparseEstimate {
    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; d];
        for (&j, &v) in self.set.iter().zip(&self.theta) {
            out[j] = v;
        }
        out
    }

    pub fn uniform_error(&self, instance: &BanditInstance) -> f64 {
        uniform_error(instance, &self.theta, &self.set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(nu: f64) -> Result<BanditInstance> {
        let f = FeatureMatrix::from_rows(&[vec![1.0, 0.0]])?;
        let t = SparseParameter::new(vec![0.5, 0.0], 1)?;
        BanditInstance::new(f, t, vec![nu], 0.1, NoiseModel::none())
    }

    #[test]
    fn reward_is_dot_plus_misspec() {
        assert_eq!(single(0.0).unwrap().rewards(), &[0.5]);
        let f = FeatureMatrix::from_rows(&[vec![0.5, 0.5, 0.5, 0.5]]).unwrap();
        let t = SparseParameter::new(vec![0.6, 0.0, 0.8, 0.0], 2).unwrap();
        let inst = BanditInstance::new(f, t, vec![0.05], 0.1, NoiseModel::none()).unwrap();
        // 0.6*0.5 + 0.8*0.5 + 0.05
        assert!((inst.rewards()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn validation_names_the_invariant() {
        let err = single(0.2).unwrap_err();
        assert!(matches!(err, Error::MisspecificationExceedsEpsilon { index: 0, .. }));
        assert!(alloc::format!("{err}").contains("misspecification exceeds epsilon"));
        assert!(matches!(
            SparseParameter::new(vec![0.5, 0.5], 1),
            Err(Error::SparsityMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(SparseParameter::new(vec![1.5, 0.0], 1), Err(Error::ParameterNormExceedsOne { .. })));
        assert!(matches!(FeatureMatrix::from_rows(&[vec![1.0, 1.0]]), Err(Error::RowNormExceedsOne { row: 0, .. })));
        let f = FeatureMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let t = SparseParameter::new(vec![0.5, 0.0, 0.0], 1).unwrap();
        assert!(matches!(
            BanditInstance::new(f, t, vec![0.0], 0.1, NoiseModel::none()),
            Err(Error::DimensionMismatch { what: "parameter", .. })
        ));
    }

    #[test]
    fn queries_are_repeatable_and_counted() {
        let inst = single(0.0).unwrap();
        let mut ledger = QueryLedger::new();
        let a = query(&inst, 0, &mut ledger).unwrap();
        let b = query(&inst, 0, &mut ledger).unwrap();
        assert_eq!(a, b);
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.entries()[1].counter, 1);
        assert_eq!(query(&inst, 1, &mut ledger), Err(Error::IndexOutOfRange { index: 1, len: 1 }));
        assert_eq!(ledger.len(), 2);
    }

    #[test]
    fn noisy_mean_concentrates() {
        let inst = single(0.0).unwrap().with_noise(NoiseModel::gaussian(17));
        let mut ledger = QueryLedger::new();
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| query(&inst, 0, &mut ledger).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn best_action_ties_go_low() {
        let f = FeatureMatrix::from_rows(&[vec![0.1], vec![0.9], vec![0.9]]).unwrap();
        let t = SparseParameter::new(vec![1.0], 1).unwrap();
        let inst = BanditInstance::new(f, t, vec![0.0; 3], 0.1, NoiseModel::none()).unwrap();
        assert_eq!(brute_force_best(&inst), (1, 0.9));
    }

    #[test]
    fn uniform_error_endpoints() {
        let f = FeatureMatrix::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, -0.6, 0.8]]).unwrap();
        let t = SparseParameter::new(vec![0.6, 0.8, 0.0], 2).unwrap();
        let inst = BanditInstance::new(f, t, vec![0.0; 2], 0.1, NoiseModel::none()).unwrap();
        assert!(uniform_error(&inst, &[0.6, 0.8], &[0, 1]) < 1e-15);
        let max_abs = inst.rewards().iter().map(|r| r.abs()).fold(0.0, f64::max);
        assert_eq!(uniform_error(&inst, &[], &[]), max_abs);
    }
}
