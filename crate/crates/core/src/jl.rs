//! Random-sign linear maps that approximately preserve inner products.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::random::seeded;

pub const DEFAULT_C_JL: f64 = 8.0;
/// Seeds tried before certification gives up.
pub const MAX_CERTIFY_ATTEMPTS: usize = 32;

/// `ceil(c_jl ln(k) / upsilon^2)` clamped to `[1, d]`.
pub fn choose_target_dim(k_effective: f64, upsilon: f64, c_jl: f64, d: usize) -> Result<usize> {
    if !(k_effective >= 2.0) || !(upsilon > 0.0) || !(c_jl > 0.0) || d == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "target dimension needs k >= 2, upsilon > 0, c_jl > 0, d >= 1 (got k={k_effective}, upsilon={upsilon}, c_jl={c_jl}, d={d})"
        )));
    }
    let raw = libm::ceil(c_jl * libm::log(k_effective) / (upsilon * upsilon));
    Ok(if raw >= d as f64 { d } else { (raw as usize).max(1) })
}

/// A `p x d` linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionMap {
    matrix: DMatrix<f64>,
    seed: u64,
    /// Distortion bound the map was certified against, if any.
    pub upsilon: Option<f64>,
}

/// Dense map with entries `+-1/sqrt(p)`. `p == d` with seed 0 gives the identity.
pub fn build_map(d: usize, p: usize, seed: u64) -> Result<CompressionMap> {
    if p == 0 || p > d {
        return Err(Error::InvalidArgument(alloc::format!("map needs 1 <= p <= d, got p={p}, d={d}")));
    }
    if p == d && seed == 0 {
        return Ok(CompressionMap { matrix: DMatrix::identity(d, d), seed, upsilon: None });
    }
    let mut rng = seeded(seed);
    let scale = 1.0 / libm::sqrt(p as f64);
    let matrix = DMatrix::from_fn(p, d, |_, _| if rng.random::<bool>() { scale } else { -scale });
    Ok(CompressionMap { matrix, seed, upsilon: None })
}

impl CompressionMap {
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Maps every row of a `k x d` matrix, giving `k x p`.
    pub fn apply_rows(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        rows * self.matrix.transpose()
    }
}

/// `max_a |<f(a), f(theta)> - <a, theta>|` over the rows of `actions`.
pub fn certify(map: &CompressionMap, actions: &DMatrix<f64>, theta: &[f64]) -> f64 {
    let ft = DVector::from_vec(map.apply(theta));
    let fa = map.apply_rows(actions);
    let th = DVector::from_column_slice(theta);
    (0..actions.nrows())
        .map(|i| libm::fabs(fa.row(i).transpose().dot(&ft) - actions.row(i).transpose().dot(&th)))
        .fold(0.0, f64::max)
}

/// Draws maps with seeds `base_seed, base_seed + 1, ...` until one has
/// distortion at most `2 upsilon` on `actions` and `theta`. A full-dimension
/// map is the identity and needs no draw. Returns the map and the number of
/// seeds tried.
pub fn certified_map(
    actions: &DMatrix<f64>,
    theta: &[f64],
    p: usize,
    upsilon: f64,
    base_seed: u64,
) -> Result<(CompressionMap, usize)> {
    let d = actions.ncols();
    if p == d {
        let mut map = build_map(d, d, 0)?;
        map.upsilon = Some(upsilon);
        return Ok((map, 1));
    }
    let allowed = 2.0 * upsilon;
    let mut best = f64::INFINITY;
    for attempt in 0..MAX_CERTIFY_ATTEMPTS {
        let mut map = build_map(d, p, base_seed.wrapping_add(attempt as u64))?;
        let v = certify(&map, actions, theta);
        if v <= allowed {
            map.upsilon = Some(upsilon);
            return Ok((map, attempt + 1));
        }
        best = best.min(v);
    }
    Err(Error::CertificationFailed { attempts: MAX_CERTIFY_ATTEMPTS, best_violation: best, allowed })
}
