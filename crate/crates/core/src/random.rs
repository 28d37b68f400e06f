//! Seeded sampling helpers and the random sparse instance generator.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::{BanditInstance, FeatureMatrix, NoiseModel, SparseParameter};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes two seeds into one stream seed (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform point on the unit sphere in `dim` dimensions.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Sorted uniform random `r`-subset of `0..n`.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, r).into_vec();
    idx.sort_unstable();
    idx
}

/// Parameters of [`random_sparse_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstanceSpec {
    pub k: usize,
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub noise: NoiseModel,
}

/// Rows are uniform directions scaled by a radius in `[0.5, 1]`; the
/// parameter has a uniform random support and unit norm; the
/// misspecification is uniform on `[-epsilon, epsilon]`.
pub fn random_sparse_instance(spec: &RandomInstanceSpec) -> Result<BanditInstance> {
    if spec.s == 0 || spec.s > spec.d {
        return Err(Error::InvalidArgument(alloc::format!("sparsity {} must lie in 1..={}", spec.s, spec.d)));
    }
    let mut rng = seeded(spec.seed);
    let mut data = Vec::with_capacity(spec.k * spec.d);
    for _ in 0..spec.k {
        let dir = unit_sphere(&mut rng, spec.d);
        let radius = rng.random_range(0.5..=1.0);
        data.extend(dir.into_iter().map(|x| x * radius));
    }
    let features = FeatureMatrix::new(DMatrix::from_row_slice(spec.k, spec.d, &data))?;
    let support = random_subset(&mut rng, spec.d, spec.s);
    let values = unit_sphere(&mut rng, spec.s);
    let mut theta = alloc::vec![0.0; spec.d];
    for (&j, &v) in support.iter().zip(&values) {
        // a coordinate can land on exactly zero only with probability zero,
        // but keep the support size honest regardless
        theta[j] = if v == 0.0 { f64::MIN_POSITIVE } else { v };
    }
    let theta = SparseParameter::new(theta, spec.s)?;
    let misspec: Vec<f64> = (0..spec.k).map(|_| rng.random_range(-spec.epsilon..=spec.epsilon)).collect();
    BanditInstance::new(features, theta, misspec, spec.epsilon, spec.noise.clone())
}
