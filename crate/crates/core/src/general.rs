//! Sparse parameter recovery for general feature matrices: per-subset
//! representative actions, compressed elimination over them, then an exact
//! s-sparse minimax fit back in the original coordinates.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::benign::{run_benign_elimination, BenignOutcome, DEFAULT_C_CONST};
use crate::design::{frank_wolfe_design, support_bound};
use crate::design_elim::check_guard;
use crate::error::{Error, Result};
use crate::jl::{certified_map, choose_target_dim, CompressionMap, DEFAULT_C_JL};
use crate::minimax::chebyshev_fit;
use crate::model::{BanditInstance, FeatureMatrix, QueryLedger, SparseEstimate};
use crate::subsets::{binomial, combinations};

/// Representative rows: `z` per index subset, as row indices into the
/// feature matrix (repeats allowed), and the stacked rows themselves.
#[derive(Debug, Clone)]
pub struct Representatives {
    pub z: usize,
    pub rows: Vec<usize>,
    pub psi: DMatrix<f64>,
}

/// For every size-`s` subset, the support of a G-optimal design over those
/// columns, padded to `z` rows with its heaviest action. A subset whose
/// columns vanish contributes the first `z` rows, cycled.
pub fn collect_representatives(features: &FeatureMatrix, s: usize) -> Result<Representatives> {
    let (k, d) = (features.k(), features.d());
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(alloc::format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    check_guard(d, s)?;
    let z = support_bound(s);
    let mut rows = Vec::new();
    for set in combinations(d, s) {
        match frank_wolfe_design(&features.columns(&set)) {
            Ok(design) => {
                let mut support = design.support.clone();
                if support.len() > z {
                    support.sort_by(|a, b| b.1.total_cmp(&a.1));
                    support.truncate(z);
                    support.sort_by_key(|&(i, _)| i);
                }
                let heavy = design.heaviest();
                rows.extend(support.iter().map(|&(i, _)| i));
                rows.extend(core::iter::repeat_n(heavy, z - support.len()));
            }
            Err(Error::RankDeficient { rank: 0, .. }) => rows.extend((0..z).map(|i| i % k)),
            Err(e) => return Err(e),
        }
    }
    let psi = features.select_rows(&rows);
    Ok(Representatives { z, rows, psi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Dense, zero outside `support`.
    pub theta: Vec<f64>,
    pub support: Vec<usize>,
    /// `max_i |(psi theta - targets)_i|`.
    pub objective: f64,
}

/// Exact `min ||psi theta - targets||_inf` over `s`-sparse `theta`, by
/// solving the minimax fit on every support. Earlier supports win ties.
pub fn sparse_linf_recover(psi: &DMatrix<f64>, targets: &[f64], s: usize) -> Result<Recovery> {
    let (m, d) = psi.shape();
    if targets.len() != m {
        return Err(Error::DimensionMismatch { what: "targets", expected: m, found: targets.len() });
    }
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(alloc::format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    check_guard(d, s)?;
    if psi.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateMatrix);
    }
    let mut best: Option<Recovery> = None;
    for set in combinations(d, s) {
        let fit = chebyshev_fit(&psi.select_columns(&set), targets)?;
        let better = match &best {
            None => true,
            Some(b) => fit.objective < b.objective - 1e-12 * b.objective.max(1.0),
        };
        if better {
            let mut theta = alloc::vec![0.0; d];
            for (&j, v) in set.iter().zip(&fit.x) {
                theta[j] = *v;
            }
            best = Some(Recovery { theta, support: set, objective: fit.objective });
        }
    }
    Ok(best.expect("at least one support"))
}

/// `(s ln d)^{1/4} sqrt(epsilon)`, the distortion level for the compression.
pub fn distortion_level(s: usize, d: usize, epsilon: f64) -> f64 {
    libm::pow(s as f64 * libm::log(d as f64), 0.25) * libm::sqrt(epsilon)
}

/// `(s ln d)^{1/4} sqrt(s epsilon) + epsilon`, the shape of the error guarantee.
pub fn error_bound_shape(s: usize, d: usize, epsilon: f64) -> f64 {
    libm::pow(s as f64 * libm::log(d as f64), 0.25) * libm::sqrt(s as f64 * epsilon) + epsilon
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralParams {
    pub c_const: f64,
    pub c_jl: f64,
    /// Overrides the default of `z` elimination rounds' worth of queries.
    pub budget: Option<usize>,
    pub map_seed: u64,
}

impl Default for GeneralParams {
    fn default() -> Self {
        Self { c_const: DEFAULT_C_CONST, c_jl: DEFAULT_C_JL, budget: None, map_seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralOutcome {
    pub recovery: Recovery,
    pub phi: f64,
    pub q: usize,
    pub z: usize,
    pub psi_rows: usize,
    pub budget: usize,
    pub map: CompressionMap,
    pub map_attempts: usize,
    pub elimination: BenignOutcome,
    pub queries: usize,
}

impl GeneralOutcome {
    pub fn estimate(&self) -> SparseEstimate {
        SparseEstimate {
            set: self.recovery.support.clone(),
            theta: self.recovery.support.iter().map(|&j| self.recovery.theta[j]).collect(),
        }
    }
}

/// `z` rounds, each querying at most one design's worth of representatives.
pub fn default_budget(z: usize, psi_rows: usize, q: usize) -> usize {
    z * psi_rows.min(support_bound(q).max(2 * q))
}

/// The full pipeline. The compression map is certified against the true
/// parameter (harness-side); the elimination and recovery never read it.
/// Targets come from the first elimination round, whose design spans every
/// representative.
pub fn run_general_features(
    instance: &BanditInstance,
    params: &GeneralParams,
    ledger: &mut QueryLedger,
) -> Result<GeneralOutcome> {
    let (d, s) = (instance.d(), instance.s());
    let reps = collect_representatives(instance.features(), s)?;
    let phi = distortion_level(s, d, instance.epsilon());
    let q = if phi > 0.0 { choose_target_dim(binomial(d, s) * reps.z as f64, phi, params.c_jl, d)? } else { d };
    let (map, map_attempts) = certified_map(&reps.psi, instance.theta_star().coords(), q, phi, params.map_seed)?;
    let budget = params.budget.unwrap_or_else(|| default_budget(reps.z, reps.rows.len(), q));
    let start = ledger.len();
    let elimination = run_benign_elimination(instance, &reps.rows, &map, budget, params.c_const, ledger)?;
    let compressed = map.apply_rows(&reps.psi);
    let targets: Vec<f64> = (0..compressed.nrows())
        .map(|i| compressed.row(i).iter().zip(&elimination.first_theta_f).map(|(a, b)| a * b).sum())
        .collect();
    let recovery = sparse_linf_recover(&reps.psi, &targets, s)?;
    Ok(GeneralOutcome {
        recovery,
        phi,
        q,
        z: reps.z,
        psi_rows: reps.rows.len(),
        budget,
        map,
        map_attempts,
        elimination,
        queries: ledger.len() - start,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedDiagnostic {
    /// `supp(theta_hat)` merged with the true support.
    pub merged: Vec<usize>,
    pub g_value: f64,
    /// `c (s ln d)^{1/4} sqrt(epsilon) sqrt(g)`.
    pub bound: f64,
}

/// Harness-side bound-chain value over the merged support. Reads the true
/// parameter; never used by the pipeline.
pub fn merged_set_diagnostic(instance: &BanditInstance, theta_hat: &[f64], c: f64) -> Result<MergedDiagnostic> {
    let mut merged: Vec<usize> = (0..theta_hat.len()).filter(|&j| theta_hat[j] != 0.0).collect();
    merged.extend_from_slice(instance.theta_star().support());
    merged.sort_unstable();
    merged.dedup();
    let g_value = match frank_wolfe_design(&instance.features().columns(&merged)) {
        Ok(design) => design.g_value,
        Err(Error::RankDeficient { rank: 0, .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let phi = distortion_level(instance.s(), instance.d(), instance.epsilon());
    Ok(MergedDiagnostic { merged, g_value, bound: c * phi * libm::sqrt(g_value) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseModel, SparseParameter};
    use crate::random::{random_sparse_instance, seeded, RandomInstanceSpec};
    use alloc::vec;
    use rand::Rng;

    fn linear(k: usize, d: usize, s: usize, seed: u64) -> BanditInstance {
        let inst =
            random_sparse_instance(&RandomInstanceSpec { k, d, s, epsilon: 1e-3, seed, noise: NoiseModel::none() })
                .unwrap();
        BanditInstance::new(inst.features().clone(), inst.theta_star().clone(), vec![0.0; k], 1e-3, NoiseModel::none())
            .unwrap()
    }

    #[test]
    fn representative_counts_and_membership() {
        let inst = linear(30, 5, 2, 1);
        let reps = collect_representatives(inst.features(), 2).unwrap();
        assert_eq!(reps.z, 17);
        assert_eq!(reps.rows.len(), 10 * 17);
        assert_eq!(reps.psi.nrows(), 170);
        let m = inst.features().matrix();
        for i in 0..reps.psi.nrows() {
            assert!((0..30).any(|x| m.row(x) == reps.psi.row(i)));
        }
        let single = collect_representatives(inst.features(), 5).unwrap();
        assert_eq!(single.rows.len(), support_bound(5));
    }

    #[test]
    fn interpolating_targets_recover_the_sparse_vector() {
        let mut rng = seeded(4);
        let psi = DMatrix::from_fn(40, 6, |_, _| rng.random_range(-1.0..1.0));
        let theta0 = [0.0, 0.7, 0.0, 0.0, -0.4, 0.0];
        let targets: Vec<f64> = (0..40).map(|i| (0..6).map(|j| psi[(i, j)] * theta0[j]).sum()).collect();
        let rec = sparse_linf_recover(&psi, &targets, 2).unwrap();
        assert_eq!(rec.support, vec![1, 4]);
        assert!(rec.objective < 1e-10);
        for (got, want) in rec.theta.iter().zip(theta0) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn recovery_errors() {
        assert_eq!(sparse_linf_recover(&DMatrix::zeros(3, 3), &[1.0, 0.0, 0.0], 1), Err(Error::DegenerateMatrix));
        assert!(sparse_linf_recover(&DMatrix::from_element(3, 3, 0.1), &[1.0], 1).is_err());
        assert!(matches!(
            sparse_linf_recover(&DMatrix::from_element(2, 40, 0.1), &[0.0, 0.0], 5),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn exact_linear_pipeline_recovers_truth() {
        // d = 4 keeps q = d, so the map is the identity
        let inst = linear(25, 4, 2, 7);
        let mut ledger = QueryLedger::new();
        let out = run_general_features(&inst, &GeneralParams::default(), &mut ledger).unwrap();
        assert_eq!(out.q, 4);
        assert_eq!(out.recovery.support, inst.theta_star().support());
        for j in 0..4 {
            assert!((out.recovery.theta[j] - inst.theta_star().coords()[j]).abs() < 1e-8);
        }
        assert!(out.estimate().uniform_error(&inst) < 1e-8);
        assert_eq!(out.queries, ledger.len());
        assert!(out.queries <= out.budget);
    }

    #[test]
    fn merged_support_sizes() {
        let inst = linear(25, 6, 2, 3);
        let star = inst.theta_star();
        let same = merged_set_diagnostic(&inst, star.coords(), 1.0).unwrap();
        assert_eq!(same.merged, star.support());
        assert!(same.g_value <= 2.0 * 2.0 + 1e-9);
        let other: Vec<usize> = (0..6).filter(|j| !star.support().contains(j)).take(2).collect();
        let mut hat = vec![0.0; 6];
        for &j in &other {
            hat[j] = 0.3;
        }
        let disjoint = merged_set_diagnostic(&inst, &hat, 1.0).unwrap();
        assert_eq!(disjoint.merged.len(), 4);
        assert!(disjoint.g_value <= 8.0 + 1e-9);
    }

    #[test]
    fn recovered_objective_never_exceeds_truth() {
        for seed in 0..5 {
            let inst = random_sparse_instance(&RandomInstanceSpec {
                k: 20,
                d: 5,
                s: 2,
                epsilon: 0.05,
                seed,
                noise: NoiseModel::none(),
            })
            .unwrap();
            let reps = collect_representatives(inst.features(), 2).unwrap();
            let targets: Vec<f64> = reps.rows.iter().map(|&r| inst.rewards()[r]).collect();
            let rec = sparse_linf_recover(&reps.psi, &targets, 2).unwrap();
            let truth = SparseParameter::new(inst.theta_star().coords().to_vec(), 2).unwrap();
            let at_truth = crate::minimax::max_residual(&reps.psi, truth.coords(), &targets);
            assert!(rec.objective <= at_truth + 1e-12);
        }
    }
}
