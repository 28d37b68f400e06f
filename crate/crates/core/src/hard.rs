//! Sparse near-orthogonal feature matrices and the planted-index instances
//! built on them.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{query, BanditInstance, FeatureMatrix, NoiseModel, QueryLedger, SparseParameter};
use crate::random::{seeded, standard_normal};

pub const DEFAULT_C: f64 = 2.0;
pub const MAX_RETRIES: usize = 100;
/// Thresholds above this are reported as saturated.
pub const K_SATURATION: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardMatrixSpec {
    pub k: usize,
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    pub tau: f64,
    pub delta: f64,
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SmallEpsilon,
    LargeEpsilon,
}

/// `2 c^3 / ((1 + tau) sqrt(c^2 - 1))`.
pub fn c_prime(c: f64, tau: f64) -> f64 {
    2.0 * c * c * c / ((1.0 + tau) * libm::sqrt(c * c - 1.0))
}

impl HardMatrixSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("hard matrix spec: {msg}")));
        if self.d == 0 || self.s == 0 || self.s > self.d {
            return bad("need 1 <= s <= d");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1)");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if !(self.c > 1.0) {
            return bad("c must exceed 1");
        }
        Ok(())
    }

    pub fn c_prime(&self) -> f64 {
        c_prime(self.c, self.tau)
    }

    /// Small-epsilon iff `epsilon <= C' s / d`.
    pub fn regime(&self) -> Regime {
        if self.epsilon <= self.c_prime() * self.s as f64 / self.d as f64 {
            Regime::SmallEpsilon
        } else {
            Regime::LargeEpsilon
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub k: u64,
    pub regime: Regime,
    /// Exponent of the bound before scaling by `sqrt(delta)`.
    pub exponent: f64,
    /// The bound exceeded [`K_SATURATION`]; `k` is clamped to it.
    pub saturated: bool,
}

/// Row count past which a random draw is near-orthogonal with probability `1 - delta`.
pub fn k_threshold(spec: &HardMatrixSpec) -> Result<Threshold> {
    spec.validate()?;
    let regime = spec.regime();
    let grow = 1.0 + spec.tau;
    let exponent = match regime {
        Regime::SmallEpsilon => spec.d as f64 * grow * spec.epsilon * spec.epsilon / (4.0 * spec.c_prime()),
        Regime::LargeEpsilon => spec.s as f64 * grow * spec.epsilon / 4.0,
    };
    let value = libm::sqrt(spec.delta) * libm::exp(exponent);
    if !(value <= K_SATURATION) {
        return Ok(Threshold { k: K_SATURATION as u64, regime, exponent, saturated: true });
    }
    Ok(Threshold { k: (libm::ceil(value) as u64).max(1), regime, exponent, saturated: false })
}

/// One row: each entry is nonzero with probability `s/d`, then `N(0, 1/s)`.
pub fn sample_row<R: Rng + ?Sized>(rng: &mut R, d: usize, s: usize) -> Vec<f64> {
    let p = s as f64 / d as f64;
    let sd = 1.0 / libm::sqrt(s as f64);
    (0..d).map(|_| if rng.random::<f64>() < p { sd * standard_normal(rng) } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub matrix: DMatrix<f64>,
    /// Rows redrawn because they came out all zero.
    pub resampled_rows: usize,
}

/// `k` independent rows from the spec's seed; all-zero rows are redrawn.
pub fn sample_raw_matrix(spec: &HardMatrixSpec) -> Result<RawMatrix> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let mut data = Vec::with_capacity(spec.k * spec.d);
    let mut resampled_rows = 0;
    for _ in 0..spec.k {
        let mut row = sample_row(&mut rng, spec.d, spec.s);
        while row.iter().all(|v| *v == 0.0) {
            resampled_rows += 1;
            row = sample_row(&mut rng, spec.d, spec.s);
        }
        data.extend(row);
    }
    Ok(RawMatrix { matrix: DMatrix::from_row_slice(spec.k, spec.d, &data), resampled_rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Rows with more than `s + tau` nonzeros.
    pub sparsity_failures: usize,
    /// Rows with `|‖a‖² - 1| > tau` before normalization.
    pub norm_failures: usize,
    /// Pairs of normalized rows with `|<a_i, a_j>| > epsilon`.
    pub pair_failures: usize,
    pub max_inner: f64,
    /// The normalized rows, present only when every check passed.
    pub features: Option<FeatureMatrix>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.features.is_some()
    }
}

fn unit_rows(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = raw.clone();
    for i in 0..raw.nrows() {
        let n = raw.row(i).norm();
        if n == 0.0 {
            return Err(Error::DegenerateMatrix);
        }
        out.row_mut(i).scale_mut(1.0 / n);
    }
    Ok(out)
}

fn pair_scan(unit: &DMatrix<f64>, epsilon: f64) -> (usize, f64) {
    let gram = unit * unit.transpose();
    let mut failures = 0;
    let mut max_inner: f64 = 0.0;
    for i in 0..unit.nrows() {
        for j in i + 1..unit.nrows() {
            let v = libm::fabs(gram[(i, j)]);
            max_inner = max_inner.max(v);
            failures += usize::from(v > epsilon);
        }
    }
    (failures, max_inner)
}

/// Normalizes each row and runs the three checks exhaustively.
pub fn normalize_and_validate(raw: &DMatrix<f64>, spec: &HardMatrixSpec) -> Result<ValidationReport> {
    let limit = spec.s as f64 + spec.tau;
    let mut sparsity_failures = 0;
    let mut norm_failures = 0;
    for i in 0..raw.nrows() {
        let nnz = raw.row(i).iter().filter(|v| **v != 0.0).count();
        sparsity_failures += usize::from(nnz as f64 > limit);
        let sq = raw.row(i).norm_squared();
        norm_failures += usize::from(libm::fabs(sq - 1.0) > spec.tau);
    }
    let unit = unit_rows(raw)?;
    let (pair_failures, max_inner) = pair_scan(&unit, spec.epsilon);
    let ok = sparsity_failures == 0 && norm_failures == 0 && pair_failures == 0;
    let features = if ok { Some(FeatureMatrix::new(unit)?) } else { None };
    Ok(ValidationReport { sparsity_failures, norm_failures, pair_failures, max_inner, features })
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub features: FeatureMatrix,
    pub seed: u64,
    pub attempts: usize,
}

/// Tries seeds `seed, seed + 1, ...` until a draw passes every check.
pub fn generate_validated(spec: &HardMatrixSpec) -> Result<Generated> {
    let mut counts = [0usize; 3];
    for attempt in 0..MAX_RETRIES {
        let trial = HardMatrixSpec { seed: spec.seed.wrapping_add(attempt as u64), ..*spec };
        let raw = sample_raw_matrix(&trial)?;
        let report = normalize_and_validate(&raw.matrix, &trial)?;
        if let Some(features) = report.features {
            return Ok(Generated { features, seed: trial.seed, attempts: attempt + 1 });
        }
        counts[0] += usize::from(report.sparsity_failures > 0);
        counts[1] += usize::from(report.norm_failures > 0);
        counts[2] += usize::from(report.pair_failures > 0);
    }
    let rate = |c: usize| c as f64 / MAX_RETRIES as f64;
    Err(Error::HardMatrixRetriesExhausted {
        attempts: MAX_RETRIES,
        sparsity_rate: rate(counts[0]),
        norm_rate: rate(counts[1]),
        pair_rate: rate(counts[2]),
    })
}

/// Builds `k` rows one at a time: each candidate is drawn like a raw row
/// and kept only if it passes the sparsity and norm checks and stays within
/// `epsilon` of every kept row after normalization. Gives up after
/// `max_draws` candidates.
pub fn sample_rowwise(spec: &HardMatrixSpec, max_draws: usize) -> Result<FeatureMatrix> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let limit = spec.s as f64 + spec.tau;
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(spec.k);
    let mut draws = 0;
    while kept.len() < spec.k {
        if draws == max_draws {
            return Err(Error::HardMatrixRetriesExhausted {
                attempts: draws,
                sparsity_rate: f64::NAN,
                norm_rate: f64::NAN,
                pair_rate: f64::NAN,
            });
        }
        draws += 1;
        let row = sample_row(&mut rng, spec.d, spec.s);
        let nnz = row.iter().filter(|v| **v != 0.0).count();
        let n = norm(&row);
        if nnz == 0 || nnz as f64 > limit || libm::fabs(n * n - 1.0) > spec.tau {
            continue;
        }
        let unit: Vec<f64> = row.iter().map(|v| v / n).collect();
        if kept.iter().all(|r| libm::fabs(dot(r, &unit)) <= spec.epsilon) {
            kept.push(unit);
        }
    }
    FeatureMatrix::from_rows(&kept)
}

/// Exhaustive certificate for unit-norm rows: unit norms within `1e-9`, at
/// most `s` nonzeros, pairwise inner products within `epsilon`.
pub fn certify_rows(features: &FeatureMatrix, s: usize, epsilon: f64) -> bool {
    let m = features.matrix();
    let rows_ok = (0..m.nrows()).all(|i| {
        let r = m.row(i);
        libm::fabs(r.norm() - 1.0) <= 1e-9 && r.iter().filter(|v| **v != 0.0).count() <= s
    });
    rows_ok && pair_scan(m, epsilon).0 == 0
}

/// Plants reward `2 Delta` at row `i_star` and zero elsewhere, with
/// `theta* = 2 Delta a_{i*}` and the rest absorbed into the
/// misspecification. Fails when some row is not orthogonal enough for
/// that remainder to stay within `epsilon`.
pub fn embed_index_query(features: &FeatureMatrix, i_star: usize, delta: f64, epsilon: f64) -> Result<BanditInstance> {
    let k = features.k();
    if i_star >= k {
        return Err(Error::IndexOutOfRange { index: i_star, len: k });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("Delta must be positive, got {delta}")));
    }
    let theta: Vec<f64> = features.row(i_star).iter().map(|v| 2.0 * delta * v).collect();
    let misspec: Vec<f64> = (0..k).map(|j| if j == i_star { 0.0 } else { -dot(&features.row(j), &theta) }).collect();
    BanditInstance::new(features.clone(), SparseParameter::embedded(theta), misspec, epsilon, NoiseModel::none())
}

/// Queries actions in a seeded uniform order until one pays at least
/// `threshold`. Returns the action found, if any.
pub fn uniform_search(
    instance: &BanditInstance,
    threshold: f64,
    seed: u64,
    ledger: &mut QueryLedger,
) -> Result<Option<usize>> {
    let mut rng = seeded(seed);
    let order = rand::seq::index::sample(&mut rng, instance.k(), instance.k());
    for a in order {
        if query(instance, a, ledger)? >= threshold {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// Queries spent by `algorithm` on each instance, in order.
pub fn hardness_probe<F>(instances: &[BanditInstance], mut algorithm: F) -> Result<Vec<usize>>
where
    F: FnMut(&BanditInstance, &mut QueryLedger) -> Result<()>,
{
    instances
        .iter()
        .map(|inst| {
            let mut ledger = QueryLedger::new();
            algorithm(inst, &mut ledger)?;
            Ok(ledger.len())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    fn spec(k: usize, d: usize, s: usize, eps: f64, tau: f64, delta: f64) -> HardMatrixSpec {
        HardMatrixSpec { k, d, s, epsilon: eps, tau, delta, c: DEFAULT_C, seed: 0 }
    }

    #[test]
    fn threshold_arithmetic() {
        let t = k_threshold(&spec(10, 4, 1, 1e-9, 0.0, 1.0)).unwrap();
        assert_eq!(t.k, 1);
        // C' s / d = (16 / sqrt 3) 16 / 400 = 0.37 < 0.5: large regime, ceil(0.5 e^2) = 4
        let t = k_threshold(&spec(10, 400, 16, 0.5, 0.0, 0.25)).unwrap();
        assert_eq!(t.regime, Regime::LargeEpsilon);
        assert_eq!(t.k, 4);
        let t = k_threshold(&spec(10, 64, 8, 0.5, 0.1, 0.25)).unwrap();
        assert_eq!(t.regime, Regime::SmallEpsilon);
        assert_eq!(t.k, 1);
        let t = k_threshold(&spec(10, 1000, 900, 0.99, 0.0, 0.5)).unwrap();
        assert!(t.saturated && t.k == 1_000_000_000);
    }

    #[test]
    fn c_prime_value() {
        // 2 * 8 / (1.1 * sqrt 3)
        assert!((c_prime(2.0, 0.1) - 16.0 / (1.1 * libm::sqrt(3.0))).abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(4, 4, 5, 0.1, 0.1, 0.5).validate().is_err());
        assert!(spec(4, 4, 2, 0.1, 1.0, 0.5).validate().is_err());
        assert!(spec(4, 4, 2, 0.1, 0.1, 0.0).validate().is_err());
        assert!(HardMatrixSpec { c: 1.0, ..spec(4, 4, 2, 0.1, 0.1, 0.5) }.validate().is_err());
    }

    #[test]
    fn dense_when_s_equals_d() {
        let raw = sample_raw_matrix(&spec(20, 5, 5, 0.5, 0.1, 0.5)).unwrap();
        assert!(raw.matrix.iter().all(|v| *v != 0.0));
        assert_eq!(raw, sample_raw_matrix(&spec(20, 5, 5, 0.5, 0.1, 0.5)).unwrap());
    }

    #[test]
    fn rowwise_family_certifies() {
        let sp = HardMatrixSpec { seed: 5, ..spec(40, 64, 4, 0.4, 0.3, 0.5) };
        let f = sample_rowwise(&sp, 100_000).unwrap();
        assert_eq!(f.k(), 40);
        assert!(certify_rows(&f, 4, 0.4));
    }

    #[test]
    fn embedding_plants_the_index() {
        let sp = HardMatrixSpec { seed: 9, ..spec(30, 64, 4, 0.4, 0.3, 0.5) };
        let f = sample_rowwise(&sp, 100_000).unwrap();
        let inst = embed_index_query(&f, 7, 0.25, 0.2).unwrap();
        assert_eq!(inst.misspec()[7], 0.0);
        assert!(inst.misspec().iter().all(|v| v.abs() <= 0.2));
        assert!((inst.rewards()[7] - 0.5).abs() < 1e-12);
        for (j, r) in inst.rewards().iter().enumerate() {
            if j != 7 {
                assert_eq!(*r, 0.0);
            }
        }
        // too tight an epsilon for this family
        assert!(matches!(embed_index_query(&f, 7, 0.25, 1e-6), Err(Error::MisspecificationExceedsEpsilon { .. })));
    }

    #[test]
    fn single_action_search_costs_one_query() {
        let f = FeatureMatrix::from_rows(&[alloc::vec![1.0, 0.0]]).unwrap();
        let inst = embed_index_query(&f, 0, 0.25, 0.1).unwrap();
        let mut ledger = QueryLedger::new();
        assert_eq!(uniform_search(&inst, 0.25, 3, &mut ledger).unwrap(), Some(0));
        assert_eq!(ledger.len(), 1);
    }

    proptest! {
        #[test]
        fn thresholds_are_monotone(d in 8usize..200, s in 1usize..8, eps in 0.01f64..2.0, bump in 0.001f64..0.5) {
            let base = spec(1, d, s, eps, 0.1, 0.5);
            let t0 = k_threshold(&base).unwrap();
            let wider = k_threshold(&HardMatrixSpec { epsilon: eps + bump, ..base }).unwrap();
            if wider.regime == t0.regime {
                prop_assert!(wider.exponent >= t0.exponent && wider.k >= t0.k);
            }
            match t0.regime {
                Regime::SmallEpsilon => {
                    let bigger = HardMatrixSpec { d: d + 1, ..base };
                    if bigger.regime() == Regime::SmallEpsilon {
                        prop_assert!(k_threshold(&bigger).unwrap().k >= t0.k);
                    }
                }
                Regime::LargeEpsilon => {
                    let denser = HardMatrixSpec { s: s + 1, ..base };
                    if denser.regime() == Regime::LargeEpsilon {
                        prop_assert!(k_threshold(&denser).unwrap().k >= t0.k);
                    }
                }
            }
        }

        #[test]
        fn accepted_matrices_pass_the_certificate(seed in 0u64..2000) {
            let sp = HardMatrixSpec { seed, ..spec(6, 32, 4, 0.7, 0.6, 0.5) };
            let raw = sample_raw_matrix(&sp).unwrap();
            let report = normalize_and_validate(&raw.matrix, &sp).unwrap();
            if let Some(f) = &report.features {
                prop_assert!(certify_rows(f, 4, 0.7));
            } else {
                prop_assert!(report.sparsity_failures + report.norm_failures + report.pair_failures > 0);
            }
        }
    }
}
