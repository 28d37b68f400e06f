//! Per-subset design estimates followed by pairwise subset elimination.

use alloc::vec::Vec;

use crate::design::{estimate_parameter, frank_wolfe_design, support_bound, DesignDistribution};
use crate::error::{Error, Result};
use crate::model::{query, BanditInstance, QueryLedger, SparseEstimate};
use crate::subsets::{binomial, combinations};

/// Largest number of index subsets a run will accept.
pub const SUBSET_LIMIT: f64 = 1e5;

pub fn check_guard(d: usize, s: usize) -> Result<()> {
    let size = binomial(d, s);
    if size > SUBSET_LIMIT {
        return Err(Error::GuardExceeded { what: "index subsets", size, limit: SUBSET_LIMIT });
    }
    Ok(())
}

/// `epsilon (1 + sqrt(2 s))`, the per-subset certificate width.
pub fn certificate_width(s: usize, epsilon: f64) -> f64 {
    epsilon * (1.0 + libm::sqrt(2.0 * s as f64))
}

/// `(z + 1) C(d, s)` with `z` the core-set bound.
pub fn query_bound(d: usize, s: usize) -> f64 {
    (support_bound(s) + 1) as f64 * binomial(d, s)
}

/// The loop condition: two predictions further apart than twice the width.
pub fn disagree(p: f64, q: f64, width: f64) -> bool {
    libm::fabs(q - p) > 2.0 * width
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStep {
    pub subset: usize,
    pub rival: usize,
    pub action: usize,
    pub reward: f64,
    pub removed_subset: bool,
    pub removed_rival: bool,
}

#[derive(Debug, Clone)]
pub struct DesignElimOutcome {
    pub estimate: SparseEstimate,
    pub subsets: Vec<Vec<usize>>,
    /// Per subset, the design estimate on its columns.
    pub estimates: Vec<Vec<f64>>,
    pub alive: Vec<bool>,
    pub estimation_queries: usize,
    pub log: Vec<PairStep>,
}

impl DesignElimOutcome {
    pub fn survivor_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn is_alive(&self, set: &[usize]) -> bool {
        self.subsets.iter().position(|m| m == set).is_some_and(|i| self.alive[i])
    }
}

/// Estimates one subset. A subset whose columns vanish on every row
/// predicts zero everywhere, so it is settled without queries.
fn estimate_subset(instance: &BanditInstance, set: &[usize], ledger: &mut QueryLedger) -> Result<Vec<f64>> {
    let rows = instance.features().columns(set);
    match frank_wolfe_design(&rows) {
        Ok(design) => estimate_parameter(instance, set, &design, ledger),
        Err(Error::RankDeficient { rank: 0, .. }) => Ok(alloc::vec![0.0; set.len()]),
        Err(e) => Err(e),
    }
}

/// The design over one subset's columns, if they are not all zero.
pub fn subset_design(instance: &BanditInstance, set: &[usize]) -> Result<Option<DesignDistribution>> {
    match frank_wolfe_design(&instance.features().columns(set)) {
        Ok(d) => Ok(Some(d)),
        Err(Error::RankDeficient { rank: 0, .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn run_design_elimination(instance: &BanditInstance, ledger: &mut QueryLedger) -> Result<DesignElimOutcome> {
    let (d, s, k) = (instance.d(), instance.s(), instance.k());
    check_guard(d, s)?;
    let eps = instance.epsilon();
    let subsets = combinations(d, s);
    let start = ledger.len();
    let mut estimates = Vec::with_capacity(subsets.len());
    for set in &subsets {
        estimates.push(estimate_subset(instance, set, ledger)?);
    }
    let estimation_queries = ledger.len() - start;

    let m = instance.features().matrix();
    let ns = subsets.len();
    // pred[i * k + x] = <x_M, theta_M> for subset i
    let mut pred = Vec::with_capacity(ns * k);
    for (set, est) in subsets.iter().zip(&estimates) {
        for x in 0..k {
            pred.push(set.iter().zip(est).map(|(&j, v)| m[(x, j)] * v).sum::<f64>());
        }
    }
    let width = certificate_width(s, eps);
    let mut alive = alloc::vec![true; ns];
    let mut log = Vec::new();
    // pairs before the cursor cannot start violating once clear
    let mut cursor = 0;
    'outer: loop {
        let start = cursor;
        for i in start..ns {
            if !alive[i] {
                continue;
            }
            for j in (0..ns).filter(|&j| j != i && alive[j]) {
                for x in 0..k {
                    let (pi, pj) = (pred[i * k + x], pred[j * k + x]);
                    if disagree(pi, pj, width) {
                        let reward = query(instance, x, ledger)?;
                        let (removed_subset, removed_rival) = if libm::fabs(reward - pi) <= width {
                            (false, true)
                        } else {
                            (true, libm::fabs(reward - pj) > width)
                        };
                        alive[i] &= !removed_subset;
                        alive[j] &= !removed_rival;
                        log.push(PairStep { subset: i, rival: j, action: x, reward, removed_subset, removed_rival });
                        cursor = i;
                        continue 'outer;
                    }
                }
            }
        }
        break;
    }
    let first = alive.iter().position(|a| *a).ok_or(Error::EmptySurvivors)?;
    Ok(DesignElimOutcome {
        estimate: SparseEstimate { set: subsets[first].clone(), theta: estimates[first].clone() },
        subsets,
        estimates,
        alive,
        estimation_queries,
        log,
    })
}
