//! Small dense helpers shared by the design solver and the estimators.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot magnitude below which a column counts as dependent.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Copies row `i` of `m` into a vector.
pub fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Restricts `x` to the coordinates listed in `idx`, in that order.
pub fn restrict(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&j| x[j]).collect()
}

/// Greedy column-pivoted Gram-Schmidt. Returns the indices (ascending) of a
/// maximal set of columns whose pivots stay above [`PIVOT_TOLERANCE`].
pub fn independent_columns(m: &DMatrix<f64>) -> Vec<usize> {
    let (rows, cols) = m.shape();
    let mut residual: Vec<DVector<f64>> = (0..cols).map(|j| m.column(j).into_owned()).collect();
    let mut chosen = Vec::new();
    let mut remaining: Vec<usize> = (0..cols).collect();
    while !remaining.is_empty() && chosen.len() < rows {
        let (pos, best, best_norm) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &j)| (pos, j, residual[j].norm()))
            .fold((0, usize::MAX, -1.0), |acc, cur| if cur.2 > acc.2 { cur } else { acc });
        if best_norm < PIVOT_TOLERANCE {
            break;
        }
        remaining.swap_remove(pos);
        let q = &residual[best] / best_norm;
        for &j in &remaining {
            let proj = q.dot(&residual[j]);
            residual[j].axpy(-proj, &q, 1.0);
        }
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// Greedy row pivoting: up to `count` rows whose residuals (after projecting
/// out the previously chosen rows) are largest.
pub fn spanning_rows(m: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let t = m.transpose();
    let mut residual: Vec<DVector<f64>> = (0..t.ncols()).map(|j| t.column(j).into_owned()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < count {
        let mut best = None;
        let mut best_norm = PIVOT_TOLERANCE;
        for (i, r) in residual.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let n = r.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        let q = &residual[i] / best_norm;
        for (j, r) in residual.iter_mut().enumerate() {
            if j != i && !chosen.contains(&j) {
                let proj = q.dot(r);
                r.axpy(-proj, &q, 1.0);
            }
        }
        chosen.push(i);
    }
    chosen
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(g.clone()).ok_or(Error::SingularDesign)?;
    let inv = chol.inverse();
    // symmetrize away round-off
    Ok((&inv + inv.transpose()) * 0.5)
}

/// `x^T A x` for a square `A` and a row of `m`.
pub fn row_quadratic_form(a: &DMatrix<f64>, m: &DMatrix<f64>, i: usize) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for p in 0..n {
        let xp = m[(i, p)];
        if xp == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for q in 0..n {
            inner += a[(p, q)] * m[(i, q)];
        }
        total += xp * inner;
    }
    total
}
