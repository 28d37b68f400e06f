//! Elimination over (net point, index set, net estimator) triples.
//!
//! A family is a pair (index set `M`, estimator `t`); the triples of a family
//! differ only in the anchor `w`. Families are removed whole.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{query, BanditInstance, FeatureMatrix, QueryLedger, SparseEstimate};
use crate::net::CoveringNet;
use crate::subsets::{binomial, combinations};

/// Largest candidate-triple count a run will accept.
pub const TRIPLE_LIMIT: f64 = 1e7;

/// `|N|^2 * C(d, s)`.
pub fn triple_count(d: usize, s: usize, net_len: usize) -> f64 {
    (net_len as f64) * (net_len as f64) * binomial(d, s)
}

pub fn check_guard(d: usize, s: usize, net_len: usize) -> Result<()> {
    let size = triple_count(d, s, net_len);
    if size > TRIPLE_LIMIT {
        return Err(Error::GuardExceeded { what: "candidate triples", size, limit: TRIPLE_LIMIT });
    }
    Ok(())
}

/// A triple `(w, M, t)` by net index, subset index and net index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub w: usize,
    pub subset: usize,
    pub theta: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub triple: Triple,
    pub rival_subset: usize,
    pub rival_theta: usize,
    pub action: usize,
}

/// One loop iteration: the violation acted on, the reward seen and the family removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationStep {
    pub violation: Violation,
    pub reward: f64,
    /// `(subset, theta)` of the removed family.
    pub removed: (usize, usize),
}

/// All triples with their predictions, plus the set of surviving families.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    epsilon: f64,
    k: usize,
    n: usize,
    subsets: Vec<Vec<usize>>,
    points: Vec<Vec<f64>>,
    /// `pred[f * k + x] = <x_M, t>` for family `f = subset * n + theta`.
    pred: Vec<f64>,
    /// `center[w * n + t] = <w, t>`.
    center: Vec<f64>,
    alive: Vec<bool>,
    /// Per `(x, subset)`: min and max prediction over surviving families.
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Builds every triple over `features` and `net` at misspecification level `epsilon`.
pub fn build_candidate_sets(features: &FeatureMatrix, net: &CoveringNet, epsilon: f64) -> Result<CandidateSet> {
    let s = net.s();
    let d = features.d();
    if s > d {
        return Err(Error::DimensionMismatch { what: "net dimension", expected: d, found: s });
    }
    check_guard(d, s, net.len())?;
    let k = features.k();
    let n = net.len();
    let subsets = combinations(d, s);
    let points = net.points().to_vec();
    let m = features.matrix();
    let mut pred = Vec::with_capacity(subsets.len() * n * k);
    for set in &subsets {
        for t in &points {
            for x in 0..k {
                pred.push(set.iter().zip(t).map(|(&j, v)| m[(x, j)] * v).sum());
            }
        }
    }
    let mut center = Vec::with_capacity(n * n);
    for w in &points {
        for t in &points {
            center.push(dot(w, t));
        }
    }
    let families = subsets.len() * n;
    let ns = subsets.len();
    let mut c = CandidateSet {
        epsilon,
        k,
        n,
        subsets,
        points,
        pred,
        center,
        alive: alloc::vec![true; families],
        lo: alloc::vec![f64::INFINITY; k * ns],
        hi: alloc::vec![f64::NEG_INFINITY; k * ns],
    };
    for sub in 0..ns {
        c.refresh_extremes(sub);
    }
    Ok(c)
}

impl CandidateSet {
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn net_len(&self) -> usize {
        self.n
    }

    pub fn family_count(&self) -> usize {
        self.alive.len()
    }

    pub fn triple_count(&self) -> usize {
        self.alive.len() * self.n
    }

    pub fn alive_family_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn is_alive(&self, subset: usize, theta: usize) -> bool {
        self.alive[subset * self.n + theta]
    }

    /// Surviving families in scan order.
    pub fn alive_families(&self) -> Vec<(usize, usize)> {
        (0..self.alive.len()).filter(|&f| self.alive[f]).map(|f| (f / self.n, f % self.n)).collect()
    }

    /// `<x_M, t>` for action `x`.
    pub fn prediction(&self, subset: usize, theta: usize, x: usize) -> f64 {
        self.pred[(subset * self.n + theta) * self.k + x]
    }

    /// `<w, t>`.
    pub fn center(&self, w: usize, theta: usize) -> f64 {
        self.center[w * self.n + theta]
    }

    pub fn in_group(&self, t: Triple, x: usize) -> bool {
        libm::fabs(self.prediction(t.subset, t.theta, x) - self.center(t.w, t.theta)) <= self.epsilon / 2.0
    }

    /// The action group of a triple, `{x : |t^T (x_M - w)| <= epsilon / 2}`.
    pub fn group(&self, t: Triple) -> Vec<usize> {
        (0..self.k).filter(|&x| self.in_group(t, x)).collect()
    }

    /// Actions that fall in no group of the family `(subset, theta)`. The
    /// termination condition says nothing about these, so the output
    /// family's accuracy on them is unconstrained.
    pub fn uncovered_actions(&self, subset: usize, theta: usize) -> Vec<usize> {
        (0..self.k).filter(|&x| !(0..self.n).any(|w| self.in_group(Triple { w, subset, theta }, x))).collect()
    }

    pub fn estimate(&self, subset: usize, theta: usize) -> SparseEstimate {
        SparseEstimate { set: self.subsets[subset].clone(), theta: self.points[theta].clone() }
    }

    pub fn remove_family(&mut self, subset: usize, theta: usize) {
        self.alive[subset * self.n + theta] = false;
        self.refresh_extremes(subset);
    }

    fn refresh_extremes(&mut self, subset: usize) {
        let ns = self.subsets.len();
        for x in 0..self.k {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for t in 0..self.n {
                if self.alive[subset * self.n + t] {
                    let p = self.prediction(subset, t, x);
                    lo = lo.min(p);
                    hi = hi.max(p);
                }
            }
            self.lo[x * ns + subset] = lo;
            self.hi[x * ns + subset] = hi;
        }
    }

    fn exceeds(&self, p: f64, c: f64) -> bool {
        libm::fabs(p - c) > 2.5 * self.epsilon
    }

    /// First violation in scan order (subset, estimator, anchor; then rival
    /// subset, rival estimator; then action).
    pub fn find_violation(&self) -> Option<Violation> {
        self.find_violation_from(0)
    }

    /// As [`find_violation`](Self::find_violation) but skipping the first
    /// `start` families. Families before the first violating one can never
    /// become violating, since the surviving set only shrinks.
    fn find_violation_from(&self, start: usize) -> Option<Violation> {
        let ns = self.subsets.len();
        let mut lo_ex = alloc::vec![0.0; self.k];
        let mut hi_ex = alloc::vec![0.0; self.k];
        for f in start..self.alive.len() {
            if !self.alive[f] {
                continue;
            }
            let (subset, theta) = (f / self.n, f % self.n);
            for x in 0..self.k {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for other in (0..ns).filter(|&o| o != subset) {
                    lo = lo.min(self.lo[x * ns + other]);
                    hi = hi.max(self.hi[x * ns + other]);
                }
                lo_ex[x] = lo;
                hi_ex[x] = hi;
            }
            let preds = &self.pred[f * self.k..(f + 1) * self.k];
            for w in 0..self.n {
                let c = self.center(w, theta);
                let hit = (0..self.k).any(|x| {
                    libm::fabs(preds[x] - c) <= self.epsilon / 2.0
                        && ((lo_ex[x].is_finite() && self.exceeds(lo_ex[x], c))
                            || (hi_ex[x].is_finite() && self.exceeds(hi_ex[x], c)))
                });
                if hit {
                    return Some(self.first_rival(Triple { w, subset, theta }));
                }
            }
        }
        None
    }

    fn first_rival(&self, triple: Triple) -> Violation {
        let c = self.center(triple.w, triple.theta);
        let group = self.group(triple);
        for rival_subset in (0..self.subsets.len()).filter(|&o| o != triple.subset) {
            for rival_theta in 0..self.n {
                if !self.is_alive(rival_subset, rival_theta) {
                    continue;
                }
                for &action in &group {
                    if self.exceeds(self.prediction(rival_subset, rival_theta, action), c) {
                        return Violation { triple, rival_subset, rival_theta, action };
                    }
                }
            }
        }
        unreachable!("screened triple has no violating rival")
    }
}

#[derive(Debug, Clone)]
pub struct ParamElimOutcome {
    pub estimate: SparseEstimate,
    pub initial_triples: usize,
    pub initial_families: usize,
    pub remaining_families: usize,
    /// Actions outside every group of the output family.
    pub uncovered: Vec<usize>,
    pub log: Vec<EliminationStep>,
    pub candidates: CandidateSet,
}

/// Runs the elimination loop until no violation remains, then returns the
/// first surviving family in scan order.
pub fn run_parameter_elimination(
    instance: &BanditInstance,
    net: &CoveringNet,
    ledger: &mut QueryLedger,
) -> Result<ParamElimOutcome> {
    if net.s() != instance.s() {
        return Err(Error::DimensionMismatch { what: "net dimension", expected: instance.s(), found: net.s() });
    }
    let eps = instance.epsilon();
    let mut cands = build_candidate_sets(instance.features(), net, eps)?;
    let initial_triples = cands.triple_count();
    let initial_families = cands.family_count();
    let mut log = Vec::new();
    let mut cursor = 0;
    while let Some(v) = cands.find_violation_from(cursor) {
        cursor = v.triple.subset * cands.n + v.triple.theta;
        let reward = query(instance, v.action, ledger)?;
        let c = cands.center(v.triple.w, v.triple.theta);
        let removed = if libm::fabs(reward - c) > 1.5 * eps {
            (v.triple.subset, v.triple.theta)
        } else {
            (v.rival_subset, v.rival_theta)
        };
        cands.remove_family(removed.0, removed.1);
        log.push(EliminationStep { violation: v, reward, removed });
    }
    let (subset, theta) = *cands.alive_families().first().ok_or(Error::EmptySurvivors)?;
    Ok(ParamElimOutcome {
        estimate: cands.estimate(subset, theta),
        initial_triples,
        initial_families,
        remaining_families: cands.alive_family_count(),
        uncovered: cands.uncovered_actions(subset, theta),
        log,
        candidates: cands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{uniform_error, NoiseModel};
    use crate::net::build_with_pool;
    use crate::random::{random_sparse_instance, RandomInstanceSpec};
    use alloc::vec;
    use nalgebra::DMatrix;

    /// Direct transcription of the loop condition, in the same scan order.
    fn brute_violation(c: &CandidateSet, m: &DMatrix<f64>) -> Option<Violation> {
        let n = c.net_len();
        for subset in 0..c.subsets().len() {
            for theta in 0..n {
                if !c.is_alive(subset, theta) {
                    continue;
                }
                for w in 0..n {
                    let t = Triple { w, subset, theta };
                    for rs in 0..c.subsets().len() {
                        if rs == subset {
                            continue;
                        }
                        for rt in 0..n {
                            if !c.is_alive(rs, rt) {
                                continue;
                            }
                            for x in 0..c.k {
                                let rival: f64 =
                                    c.subsets()[rs].iter().zip(&c.points[rt]).map(|(&j, v)| m[(x, j)] * v).sum();
                                let anchor = dot(&c.points[w], &c.points[theta]);
                                let own: f64 =
                                    c.subsets()[subset].iter().zip(&c.points[theta]).map(|(&j, v)| m[(x, j)] * v).sum();
                                if (own - anchor).abs() <= c.epsilon / 2.0 && (rival - anchor).abs() > 2.5 * c.epsilon {
                                    return Some(Violation { triple: t, rival_subset: rs, rival_theta: rt, action: x });
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn instance(d: usize, s: usize, eps: f64, seed: u64) -> BanditInstance {
        random_sparse_instance(&RandomInstanceSpec { k: 10, d, s, epsilon: eps, seed, noise: NoiseModel::none() })
            .unwrap()
    }

    #[test]
    fn counting_triples() {
        let f = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let net = crate::net::build_separated_net(1, 1.0, 0).unwrap();
        let c = build_candidate_sets(&f, &net, 1.0).unwrap();
        assert_eq!(c.triple_count(), 8);
        assert_eq!(c.family_count(), 4);
    }

    #[test]
    fn anchor_equal_to_restriction_is_in_every_group() {
        let net = build_with_pool(2, 0.5, 3, 500).unwrap();
        let w = net.points()[2].clone();
        let f = FeatureMatrix::from_rows(&[vec![w[0], 0.0, w[1]]]).unwrap();
        let c = build_candidate_sets(&f, &net, 0.5).unwrap();
        // subset {0, 2} is index 1 in lexicographic order
        for theta in 0..net.len() {
            assert!(c.in_group(Triple { w: 2, subset: 1, theta }, 0));
        }
    }

    #[test]
    fn identical_predictions_never_violate() {
        // every subset sees the same coordinates, so all families agree
        let f = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let net = crate::net::build_separated_net(1, 1.0, 0).unwrap();
        let c = build_candidate_sets(&f, &net, 0.3).unwrap();
        assert_eq!(c.find_violation(), None);
    }

    #[test]
    fn scan_matches_brute_force_under_removals() {
        for seed in 0..6 {
            let inst = instance(3, 2, 0.4, seed);
            let net = build_with_pool(2, 0.4, seed, 400).unwrap();
            let mut c = build_candidate_sets(inst.features(), &net, 0.4).unwrap();
            let mut steps = 0;
            loop {
                let fast = c.find_violation();
                assert_eq!(fast, brute_violation(&c, inst.features().matrix()), "seed {seed} step {steps}");
                let Some(v) = fast else { break };
                let r = inst.rewards()[v.action];
                if (r - c.center(v.triple.w, v.triple.theta)).abs() > 0.6 {
                    c.remove_family(v.triple.subset, v.triple.theta);
                } else {
                    c.remove_family(v.rival_subset, v.rival_theta);
                }
                steps += 1;
            }
        }
    }

    fn seeded_net(inst: &BanditInstance, eps: f64) -> CoveringNet {
        let star = inst.theta_star();
        let restricted: Vec<f64> = star.support().iter().map(|&j| star.coords()[j]).collect();
        crate::net::build_separated_net(star.s(), eps, 0).unwrap().include_point(&restricted).unwrap()
    }

    #[test]
    fn seeded_truth_survives_and_output_is_accurate() {
        for seed in 0..5 {
            let inst = instance(4, 2, 0.1, seed);
            let net = seeded_net(&inst, 0.1);
            let mut ledger = QueryLedger::new();
            let out = run_parameter_elimination(&inst, &net, &mut ledger).unwrap();
            let star = inst.theta_star();
            let truth_subset = out.candidates.subsets().iter().position(|m| m == star.support()).unwrap();
            assert!(out.candidates.is_alive(truth_subset, net.len() - 1));
            assert_eq!(ledger.len(), out.log.len());
            assert!(ledger.len() <= out.initial_families);
            assert!(out.uncovered.is_empty());
            let err = uniform_error(&inst, &out.estimate.theta, &out.estimate.set);
            assert!(err <= 0.4 + 1e-9, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn single_coordinate_nets_leave_generic_rows_uncovered() {
        // with one coordinate the net is {+1, -1}, so a row joins a group only
        // when its restricted coordinate is within epsilon/2 of +-1
        let inst = instance(4, 1, 0.1, 0);
        let mut ledger = QueryLedger::new();
        let out = run_parameter_elimination(&inst, &seeded_net(&inst, 0.1), &mut ledger).unwrap();
        let m = inst.features().matrix();
        let j = out.estimate.set[0];
        let expected: Vec<usize> = (0..inst.k()).filter(|&x| (1.0 - m[(x, j)].abs()) > 0.05).collect();
        assert_eq!(out.uncovered, expected);
        assert!(ledger.is_empty());
    }

    #[test]
    fn guard_refuses_large_configurations() {
        assert!(check_guard(20, 3, 100).is_err());
        assert!(check_guard(5, 2, 100).is_ok());
    }
}
