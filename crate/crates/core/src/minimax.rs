//! Exact minimax (Chebyshev) linear fits, `min_x max_i |(A x - y)_i|`.
//!
//! Solved as the dual linear program
//!   max sum_i y_i (v_i - u_i)  s.t.  A^T (v - u) = 0,  sum_i (u_i + v_i) = 1,  u, v >= 0
//! with a two-phase tableau simplex under Bland's rule. The primal `(x, t)`
//! are the simplex multipliers of the optimal basis.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::independent_columns;

const TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevFit {
    pub x: Vec<f64>,
    /// `max_i |(A x - y)_i|` evaluated at `x`.
    pub objective: f64,
    /// Optimal value of the dual program; equals `objective` up to round-off.
    pub dual_value: f64,
}

pub fn max_residual(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let p: f64 = a.row(i).iter().zip(x).map(|(u, v)| u * v).sum();
            libm::fabs(p - y[i])
        })
        .fold(0.0, f64::max)
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost . z` over columns `0..allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let reduced =
                    cost[j] - self.rows.iter().zip(&self.basis).map(|(row, &b)| cost[b] * row[j]).sum::<f64>();
                if reduced > TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] > TOL {
                    let ratio = row[self.rhs] / row[j];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - TOL || (ratio <= lr + TOL && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::InvalidArgument("minimax program is unbounded".into()));
            };
            self.pivot(r, j);
        }
    }
}

/// Solves `max c.z` s.t. `E z = f`, `z >= 0` for `f >= 0`. Returns the
/// optimal basis (one column per surviving row) and the surviving rows.
fn simplex(e: &DMatrix<f64>, f: &[f64], c: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let (r, nv) = e.shape();
    let width = nv + r + 1;
    let rows: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut row = alloc::vec![0.0; width];
            for j in 0..nv {
                row[j] = e[(i, j)];
            }
            row[nv + i] = 1.0;
            row[width - 1] = f[i];
            row
        })
        .collect();
    let mut t = Tableau { rows, basis: (nv..nv + r).collect(), rhs: width - 1 };

    let mut phase1 = alloc::vec![0.0; nv + r];
    for v in &mut phase1[nv..] {
        *v = -1.0;
    }
    t.run(&phase1, nv + r)?;
    let infeasibility: f64 = t.rows.iter().zip(&t.basis).filter(|(_, &b)| b >= nv).map(|(row, _)| row[t.rhs]).sum();
    if infeasibility > 1e-9 {
        return Err(Error::InvalidArgument("minimax program is infeasible".into()));
    }
    // drive remaining artificials out of the basis; drop rows where that fails
    let mut kept: Vec<usize> = (0..r).collect();
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= nv {
            if let Some(j) = (0..nv).find(|&j| !t.basis.contains(&j) && libm::fabs(t.rows[i][j]) > TOL) {
                t.pivot(i, j);
            } else {
                t.rows.remove(i);
                t.basis.remove(i);
                kept.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let mut phase2 = c.to_vec();
    phase2.resize(nv + r, 0.0);
    t.run(&phase2, nv)?;
    Ok((t.basis, kept))
}

/// Exact `min_x ||A x - y||_inf`. Dependent columns of `A` get `x_j = 0`.
pub fn chebyshev_fit(a: &DMatrix<f64>, y: &[f64]) -> Result<ChebyshevFit> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { what: "targets", expected: m, found: y.len() });
    }
    if m == 0 {
        return Ok(ChebyshevFit { x: alloc::vec![0.0; n], objective: 0.0, dual_value: 0.0 });
    }
    let cols = independent_columns(a);
    let nr = cols.len();
    let ar = a.select_columns(&cols);
    // columns 0..m are u_i = (-a_i, 1), columns m..2m are v_i = (a_i, 1)
    let mut e = DMatrix::zeros(nr + 1, 2 * m);
    let mut c = alloc::vec![0.0; 2 * m];
    for i in 0..m {
        for j in 0..nr {
            e[(j, i)] = -ar[(i, j)];
            e[(j, m + i)] = ar[(i, j)];
        }
        e[(nr, i)] = 1.0;
        e[(nr, m + i)] = 1.0;
        c[i] = -y[i];
        c[m + i] = y[i];
    }
    let mut f = alloc::vec![0.0; nr + 1];
    f[nr] = 1.0;
    let (basis, kept) = simplex(&e, &f, &c)?;

    // multipliers: E_B^T pi = c_B over the kept rows
    let q = kept.len();
    let eb = DMatrix::from_fn(q, q, |i, j| e[(kept[j], basis[i])]);
    let cb = DVector::from_iterator(q, basis.iter().map(|&b| c[b]));
    let pi = eb.lu().solve(&cb).ok_or(Error::SingularDesign)?;
    let mut full_pi = alloc::vec![0.0; nr + 1];
    for (idx, &row) in kept.iter().enumerate() {
        full_pi[row] = pi[idx];
    }
    let mut x = alloc::vec![0.0; n];
    for (idx, &j) in cols.iter().enumerate() {
        x[j] = full_pi[idx];
    }
    // the dual optimum: recompute the basic solution from the kept rows
    let fb = DVector::from_iterator(q, kept.iter().map(|&r| f[r]));
    let lam = DMatrix::from_fn(q, q, |i, j| e[(kept[i], basis[j])]).lu().solve(&fb).ok_or(Error::SingularDesign)?;
    let dual_value: f64 = basis.iter().zip(lam.iter()).map(|(&b, l)| c[b] * l).sum();
    let objective = max_residual(a, &x, y);
    Ok(ChebyshevFit { x, objective, dual_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded;
    use crate::subsets::combinations;
    use proptest::{prop_assert, proptest};
    use rand::Rng;

    /// Best fit over all equioscillation candidates: every choice of n + 1
    /// rows and residual signs, solved as a square system.
    fn reference_objective(a: &DMatrix<f64>, y: &[f64]) -> f64 {
        let (m, n) = a.shape();
        let mut best = f64::INFINITY;
        for rows in combinations(m, n + 1) {
            for signs in 0..(1u32 << (n + 1)) {
                let sys = DMatrix::from_fn(n + 1, n + 1, |i, j| {
                    if j < n {
                        a[(rows[i], j)]
                    } else if signs >> i & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                });
                let rhs = DVector::from_iterator(n + 1, rows.iter().map(|&r| y[r]));
                if let Some(sol) = sys.lu().solve(&rhs) {
                    if sol.iter().all(|v| v.is_finite()) {
                        let x: Vec<f64> = sol.iter().take(n).copied().collect();
                        best = best.min(max_residual(a, &x, y));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn constant_fit_is_midrange() {
        let a = DMatrix::from_element(4, 1, 1.0);
        let fit = chebyshev_fit(&a, &[0.0, 1.0, 3.0, 2.0]).unwrap();
        assert!((fit.x[0] - 1.5).abs() < 1e-12);
        assert!((fit.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reaches_zero() {
        let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.2, -0.3, -0.7, 0.1]);
        let x0 = [0.3, -0.8];
        let y: Vec<f64> = (0..5).map(|i| a[(i, 0)] * x0[0] + a[(i, 1)] * x0[1]).collect();
        let fit = chebyshev_fit(&a, &y).unwrap();
        assert!(fit.objective < 1e-12);
        assert!((fit.x[0] - 0.3).abs() < 1e-10 && (fit.x[1] + 0.8).abs() < 1e-10);
    }

    #[test]
    fn dependent_columns_are_zeroed() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, 1.0, -1.0, -2.0]);
        let fit = chebyshev_fit(&a, &[1.0, 0.2, -0.4]).unwrap();
        assert_eq!(fit.x.iter().filter(|v| **v == 0.0).count(), 1);
        assert!((fit.objective - reference_objective(&a.columns(0, 1).into_owned(), &[1.0, 0.2, -0.4])).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix_fit() {
        let a = DMatrix::zeros(3, 2);
        let fit = chebyshev_fit(&a, &[0.5, -0.9, 0.1]).unwrap();
        assert!((fit.objective - 0.9).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(60))]

        #[test]
        fn matches_equioscillation_reference(seed in 0u64..100_000, m in 4usize..12, n in 1usize..4) {
            let mut rng = seeded(seed);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fit = chebyshev_fit(&a, &y).unwrap();
            let reference = reference_objective(&a, &y);
            prop_assert!((fit.objective - reference).abs() <= 1e-9, "lp {} vs reference {}", fit.objective, reference);
            prop_assert!((fit.objective - fit.dual_value).abs() <= 1e-9);
        }
    }
}
