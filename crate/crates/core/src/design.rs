//! Near G-optimal designs by Frank-Wolfe and the design-weighted least-squares estimator.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{independent_columns, row_quadratic_form, spanning_rows, spd_inverse};
use crate::model::{query, BanditInstance, QueryLedger};

/// Weights below this are dropped after each step.
pub const PRUNE_BELOW: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
/// Step-halvings tried when the closed-form step would raise `g`.
const MAX_BACKTRACK: usize = 40;
/// Relative slack on the stopping rule, so a design sitting on `2 r` up to
/// round-off counts as converged.
pub const STOP_SLACK: f64 = 1e-9;

/// `ceil(4 s ln ln max(s, 3) + 16)`, the core-set size bound.
pub fn support_bound(s: usize) -> usize {
    let m = s.max(3) as f64;
    libm::ceil(4.0 * s as f64 * libm::log(libm::log(m)) + 16.0) as usize
}

/// A finitely supported design over the rows of some matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDistribution {
    /// `(row index, weight)`, ascending by row.
    pub support: Vec<(usize, f64)>,
    /// Retained columns of the input; the design lives in their span.
    pub columns: Vec<usize>,
    pub design_matrix: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub g_value: f64,
    /// `g` after initialization and after every accepted step.
    pub g_trace: Vec<f64>,
}

impl DesignDistribution {
    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn support_rows(&self) -> Vec<usize> {
        self.support.iter().map(|&(i, _)| i).collect()
    }

    /// Row index carrying the most weight, lowest index on ties.
    pub fn heaviest(&self) -> usize {
        let mut best = self.support[0];
        for &(i, w) in &self.support[1..] {
            if w > best.1 {
                best = (i, w);
            }
        }
        best.0
    }

    /// `G^{-1} sum_a rho(a) r_a a` over the support, with `rewards` aligned to
    /// `support`. The result has one entry per input column; discarded
    /// columns get zero.
    pub fn estimate(&self, rows: &DMatrix<f64>, rewards: &[f64]) -> Vec<f64> {
        let r = self.rank();
        let mut acc = DVector::zeros(r);
        for (&(i, w), &y) in self.support.iter().zip(rewards) {
            for (c, &j) in self.columns.iter().enumerate() {
                acc[c] += w * y * rows[(i, j)];
            }
        }
        let reduced = &self.inverse * acc;
        let mut out = alloc::vec![0.0; rows.ncols()];
        for (c, &j) in self.columns.iter().enumerate() {
            out[j] = reduced[c];
        }
        out
    }
}

fn weighted_gram(x: &DMatrix<f64>, support: &[(usize, f64)]) -> DMatrix<f64> {
    let r = x.ncols();
    let mut g = DMatrix::zeros(r, r);
    for &(i, w) in support {
        let row = x.row(i);
        for p in 0..r {
            for q in 0..r {
                g[(p, q)] += w * row[p] * row[q];
            }
        }
    }
    g
}

fn leverages(x: &DMatrix<f64>, inv: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| row_quadratic_form(inv, x, i)).collect()
}

/// Index and value of the largest entry, lowest index on ties.
fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

struct Evaluated {
    inverse: DMatrix<f64>,
    gram: DMatrix<f64>,
    lev: Vec<f64>,
}

fn evaluate(x: &DMatrix<f64>, support: &[(usize, f64)]) -> Result<Evaluated> {
    let gram = weighted_gram(x, support);
    let inverse = spd_inverse(&gram)?;
    let lev = leverages(x, &inverse);
    Ok(Evaluated { inverse, gram, lev })
}

fn mix(support: &[(usize, f64)], j: usize, alpha: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = support.iter().map(|&(i, w)| (i, (1.0 - alpha) * w)).collect();
    match out.binary_search_by_key(&j, |&(i, _)| i) {
        Ok(pos) => out[pos].1 += alpha,
        Err(pos) => out.insert(pos, (j, alpha)),
    }
    out.retain(|&(_, w)| w >= PRUNE_BELOW);
    let total: f64 = out.iter().map(|&(_, w)| w).sum();
    for e in &mut out {
        e.1 /= total;
    }
    out
}

/// Frank-Wolfe (Fedorov-Wynn step) on the rows of `rows`, stopping as soon as
/// `g <= 2 r` (up to `STOP_SLACK`) where `r` is the column rank. Columns
/// with negligible pivots are discarded first.
pub fn frank_wolfe_design(rows: &DMatrix<f64>) -> Result<DesignDistribution> {
    if rows.nrows() == 0 || rows.ncols() == 0 {
        return Err(Error::EmptyFeatureMatrix);
    }
    let columns = independent_columns(rows);
    let r = columns.len();
    if r == 0 {
        return Err(Error::RankDeficient { rank: 0, columns: rows.ncols() });
    }
    let x = rows.select_columns(&columns);
    let k = x.nrows();
    let rf = r as f64;
    let target = 2.0 * rf;

    let mut init = spanning_rows(&x, r);
    if init.len() < r {
        return Err(Error::RankDeficient { rank: init.len(), columns: rows.ncols() });
    }
    let want = (2 * r).min(k);
    if init.len() < want {
        let basis: Vec<(usize, f64)> = init.iter().map(|&i| (i, 1.0 / rf)).collect();
        let ev = evaluate(&x, &basis)?;
        let mut order: Vec<usize> = (0..k).filter(|i| !init.contains(i)).collect();
        order.sort_by(|&a, &b| ev.lev[b].total_cmp(&ev.lev[a]).then(a.cmp(&b)));
        init.extend(order.into_iter().take(want - init.len()));
    }
    init.sort_unstable();
    let w0 = 1.0 / init.len() as f64;
    let mut support: Vec<(usize, f64)> = init.into_iter().map(|i| (i, w0)).collect();
    let mut ev = evaluate(&x, &support)?;
    let (mut j, mut g) = argmax(&ev.lev);
    let mut g_trace = alloc::vec![g];

    let mut iterations = 0;
    while g > target * (1.0 + STOP_SLACK) {
        if iterations == MAX_ITERATIONS {
            return Err(Error::DesignNotConverged { g_value: g, target, iterations });
        }
        iterations += 1;
        let mut alpha = (g - rf) / (rf * (g - 1.0));
        let mut next = None;
        for _ in 0..=MAX_BACKTRACK {
            let cand = mix(&support, j, alpha);
            if let Ok(ce) = evaluate(&x, &cand) {
                let (cj, cg) = argmax(&ce.lev);
                if cg <= g {
                    next = Some((cand, ce, cj, cg));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, ce, cj, cg)) = next else {
            return Err(Error::DesignNotConverged { g_value: g, target, iterations });
        };
        support = cand;
        ev = ce;
        j = cj;
        g = cg;
        g_trace.push(g);
    }

    Ok(DesignDistribution { support, columns, design_matrix: ev.gram, inverse: ev.inverse, g_value: g, g_trace })
}

/// Exact `max_a a^T G^{-1} a` over every row, recomputed from scratch.
pub fn g_value(rows: &DMatrix<f64>, design: &DesignDistribution) -> Result<f64> {
    let x = rows.select_columns(&design.columns);
    let inv = spd_inverse(&weighted_gram(&x, &design.support))?;
    Ok(leverages(&x, &inv).into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Queries each support action once and returns the design estimate on the
/// columns `set`, one entry per column of `set`.
pub fn estimate_parameter(
    instance: &BanditInstance,
    set: &[usize],
    design: &DesignDistribution,
    ledger: &mut QueryLedger,
) -> Result<Vec<f64>> {
    let rows = instance.features().columns(set);
    let mut rewards = Vec::with_capacity(design.support.len());
    for &(i, _) in &design.support {
        rewards.push(query(instance, i, ledger)?);
    }
    Ok(design.estimate(&rows, &rewards))
}
