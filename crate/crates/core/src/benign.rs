//! Rounds of design estimation and action elimination in a compressed space.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::design::{frank_wolfe_design, support_bound};
use crate::error::{Error, Result};
use crate::jl::{certified_map, choose_target_dim, CompressionMap};
use crate::model::{query, BanditInstance, QueryLedger};

pub const DEFAULT_C_CONST: f64 = 2.0;

/// `C (ln k)^{1/4} sqrt(epsilon)`.
pub fn noiseless_threshold(c_const: f64, k: usize, epsilon: f64) -> f64 {
    c_const * libm::pow(libm::log(k as f64), 0.25) * libm::sqrt(epsilon)
}

/// `sqrt((p / t) ln(k n))`, the noise allowance after `t` queries.
pub fn noise_term(p: usize, t: usize, k: usize, n: usize) -> f64 {
    libm::sqrt(p as f64 / t as f64 * libm::log(k as f64 * n as f64))
}

pub fn noisy_threshold(c_const: f64, k: usize, epsilon: f64, p: usize, t: usize, n: usize) -> f64 {
    noiseless_threshold(c_const, k, epsilon) + c_const * noise_term(p, t, k, n)
}

/// `(ln k)^{1/4} sqrt(epsilon)`, the distortion level that balances the
/// compression error against `epsilon sqrt(p)`.
pub fn balanced_upsilon(k: usize, epsilon: f64) -> f64 {
    libm::pow(libm::log(k as f64), 0.25) * libm::sqrt(epsilon)
}

/// Whether `ln k <= epsilon^2 s^{2(1 + delta)}`, the regime where the
/// query count is polynomial in `s`. Takes `ln k` directly so that huge
/// action counts are expressible.
pub fn corollary_regime_check(s: usize, delta: f64, epsilon: f64, log_k: f64) -> Result<bool> {
    if !(delta >= 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("delta must be at least 1, got {delta}")));
    }
    let rhs = epsilon * epsilon * libm::pow(s as f64, 2.0 * (1.0 + delta));
    // inclusive, with room for the round trip through exp/ln
    Ok(log_k <= rhs * (1.0 + 1e-12))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Active actions at the start of the round.
    pub active: Vec<usize>,
    pub design_support: usize,
    pub g_value: f64,
    pub threshold: f64,
    pub cumulative_queries: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone)]
pub struct BenignOutcome {
    /// Estimate from the last completed round.
    pub theta_f: Vec<f64>,
    /// Estimate from the first round, whose design covers every candidate.
    pub first_theta_f: Vec<f64>,
    pub survivors: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub queries: usize,
}

/// Runs the elimination over the candidate `actions` (row indices of the
/// instance, repeats allowed) mapped through `map`, spending at most `budget`
/// queries. Noisy instances use the widened threshold and geometrically
/// growing sample sizes; noiseless ones query each support action once per
/// round and also stop at a fixed point.
pub fn run_benign_elimination(
    instance: &BanditInstance,
    actions: &[usize],
    map: &CompressionMap,
    budget: usize,
    c_const: f64,
    ledger: &mut QueryLedger,
) -> Result<BenignOutcome> {
    if actions.is_empty() {
        return Err(Error::EmptySurvivors);
    }
    if map.d() != instance.d() {
        return Err(Error::DimensionMismatch { what: "compression map", expected: instance.d(), found: map.d() });
    }
    let noisy = instance.noise().is_noisy();
    let eps = instance.epsilon();
    let k = actions.len();
    let p = map.p();
    let compressed = map.apply_rows(&instance.features().select_rows(actions));
    let start = ledger.len();

    let mut active: Vec<usize> = (0..k).collect();
    let mut rounds = Vec::new();
    let mut theta_f: Option<Vec<f64>> = None;
    let mut first_theta_f = None;
    let mut round = 0u32;
    loop {
        let x: DMatrix<f64> = compressed.select_rows(&active);
        let design = match frank_wolfe_design(&x) {
            Ok(d) => d,
            Err(Error::RankDeficient { rank: 0, .. }) => {
                // every active row maps to zero: all predictions are zero
                let z = alloc::vec![0.0; p];
                first_theta_f.get_or_insert_with(|| z.clone());
                theta_f = Some(z);
                break;
            }
            Err(e) => return Err(e),
        };
        let counts: Vec<usize> = if noisy {
            let m = (design.support.len() as f64) * libm::pow(2.0, round as f64);
            design.support.iter().map(|&(_, w)| libm::ceil(w * m) as usize).collect()
        } else {
            alloc::vec![1; design.support.len()]
        };
        let planned: usize = counts.iter().sum();
        let used = ledger.len() - start;
        if used + planned > budget {
            if round == 0 {
                return Err(Error::BudgetTooSmall { budget, needed: planned });
            }
            break;
        }
        let mut means = Vec::with_capacity(counts.len());
        for (&(i, _), &c) in design.support.iter().zip(&counts) {
            let action = actions[active[i]];
            let mut total = 0.0;
            for _ in 0..c {
                total += query(instance, action, ledger)?;
            }
            means.push(total / c as f64);
        }
        let est = design.estimate(&x, &means);
        let t = ledger.len() - start;
        let threshold =
            if noisy { noisy_threshold(c_const, k, eps, p, t, budget) } else { noiseless_threshold(c_const, k, eps) };
        let values: Vec<f64> = (0..active.len()).map(|i| x.row(i).iter().zip(&est).map(|(a, b)| a * b).sum()).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let next: Vec<usize> =
            active.iter().zip(&values).filter(|(_, &v)| best - v <= threshold).map(|(&a, _)| a).collect();
        rounds.push(RoundRecord {
            active: active.iter().map(|&i| actions[i]).collect(),
            design_support: design.support.len(),
            g_value: design.g_value,
            threshold,
            cumulative_queries: t,
            survivors: next.len(),
        });
        first_theta_f.get_or_insert_with(|| est.clone());
        theta_f = Some(est);
        let fixed_point = next.len() == active.len();
        active = next;
        if active.len() <= 1 || (fixed_point && !noisy) || ledger.len() - start >= budget {
            break;
        }
        round += 1;
    }
    let theta_f = theta_f.unwrap_or_else(|| alloc::vec![0.0; p]);
    Ok(BenignOutcome {
        first_theta_f: first_theta_f.unwrap_or_else(|| theta_f.clone()),
        theta_f,
        survivors: active.iter().map(|&i| actions[i]).collect(),
        rounds,
        queries: ledger.len() - start,
    })
}

/// `max_a |r_a - <f(a), theta_f>|` over the listed actions.
pub fn compressed_error(instance: &BanditInstance, actions: &[usize], map: &CompressionMap, theta_f: &[f64]) -> f64 {
    let m = instance.features().matrix();
    actions
        .iter()
        .map(|&a| {
            let row: Vec<f64> = m.row(a).iter().copied().collect();
            let fa = map.apply(&row);
            let pred: f64 = fa.iter().zip(theta_f).map(|(x, y)| x * y).sum();
            libm::fabs(instance.rewards()[a] - pred)
        })
        .fold(0.0, f64::max)
}

/// Default query budget: `ceil(sqrt(ln k) / epsilon)`, raised to four rounds
/// of the largest possible design when that is bigger.
pub fn default_budget(k: usize, epsilon: f64, p: usize) -> usize {
    let base = libm::ceil(libm::sqrt(libm::log(k.max(2) as f64)) / epsilon) as usize;
    base.max(4 * k.min(support_bound(p).max(2 * p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenignParams {
    pub c_const: f64,
    pub c_jl: f64,
    pub budget: Option<usize>,
    pub map_seed: u64,
}

impl Default for BenignParams {
    fn default() -> Self {
        Self { c_const: DEFAULT_C_CONST, c_jl: crate::jl::DEFAULT_C_JL, budget: None, map_seed: 0 }
    }
}

/// Harness-side driver: sizes the map at the balanced distortion level,
/// certifies it against the instance's true parameter (the elimination
/// itself never sees the parameter), then runs the elimination on every row.
pub fn run_with_certified_map(
    instance: &BanditInstance,
    params: &BenignParams,
    ledger: &mut QueryLedger,
) -> Result<(BenignOutcome, CompressionMap)> {
    let k = instance.k();
    let upsilon = balanced_upsilon(k.max(2), instance.epsilon());
    let p = choose_target_dim(k.max(2) as f64, upsilon, params.c_jl, instance.d())?;
    let (map, _) =
        certified_map(instance.features().matrix(), instance.theta_star().coords(), p, upsilon, params.map_seed)?;
    let budget = params.budget.unwrap_or_else(|| default_budget(k, instance.epsilon(), p));
    let actions: Vec<usize> = (0..k).collect();
    let out = run_benign_elimination(instance, &actions, &map, budget, params.c_const, ledger)?;
    Ok((out, map))
}
