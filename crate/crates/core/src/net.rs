//! Greedy separated subsets of the unit sphere.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::NORM_TOLERANCE;
use crate::random::{seeded, unit_sphere};

/// Largest candidate pool the greedy packing will scan.
pub const MAX_POOL: usize = 1_000_000;

/// Pairwise `epsilon / 2`-separated unit vectors in `s` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringNet {
    points: Vec<Vec<f64>>,
    separation: f64,
    s: usize,
    candidate_pool_size: usize,
}

/// `(4 / epsilon + 1)^s`, the packing bound on any `epsilon / 2`-separated set.
pub fn size_bound(s: usize, epsilon: f64) -> f64 {
    libm::pow(4.0 / epsilon + 1.0, s as f64)
}

pub fn default_pool_size(s: usize, epsilon: f64) -> usize {
    let want = 200.0 * size_bound(s, epsilon);
    if want >= MAX_POOL as f64 {
        MAX_POOL
    } else {
        libm::ceil(want) as usize
    }
}

/// The seeded candidate pool scanned by [`build_separated_net`].
pub fn candidate_pool(s: usize, pool_size: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..pool_size).map(|_| unit_sphere(&mut rng, s)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn check_args(s: usize, epsilon: f64) -> Result<()> {
    if s < 1 {
        return Err(Error::InvalidArgument("net dimension must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::InvalidArgument(alloc::format!("net epsilon must lie in (0, 2], got {epsilon}")));
    }
    Ok(())
}

/// Greedy packing over the default pool.
pub fn build_separated_net(s: usize, epsilon: f64, seed: u64) -> Result<CoveringNet> {
    check_args(s, epsilon)?;
    build_with_pool(s, epsilon, seed, default_pool_size(s, epsilon))
}

/// Greedy packing over an explicit pool size: a candidate is accepted iff
/// it is at least `epsilon / 2` from every point accepted so far.
pub fn build_with_pool(s: usize, epsilon: f64, seed: u64, pool_size: usize) -> Result<CoveringNet> {
    check_args(s, epsilon)?;
    if pool_size > MAX_POOL {
        return Err(Error::PoolCapExceeded { requested: pool_size, cap: MAX_POOL });
    }
    let separation = epsilon / 2.0;
    let mut rng = seeded(seed);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for _ in 0..pool_size {
        let c = unit_sphere(&mut rng, s);
        if points.iter().all(|p| dist(p, &c) >= separation) {
            points.push(c);
        }
    }
    Ok(CoveringNet { points, separation, s, candidate_pool_size: pool_size })
}

impl CoveringNet {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn candidate_pool_size(&self) -> usize {
        self.candidate_pool_size
    }

    /// Index of the point closest to `x`, lowest index on ties.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.s {
            return Err(Error::DimensionMismatch { what: "net query", expected: self.s, found: x.len() });
        }
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("net is empty".into()));
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = dist(p, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }

    pub fn nearest_point(&self, x: &[f64]) -> Result<&[f64]> {
        Ok(&self.points[self.nearest(x)?])
    }

    /// Inserts the unit vector `v`, dropping points closer than the separation.
    /// The new point goes at the end, so surviving points keep their order.
    pub fn include_point(&self, v: &[f64]) -> Result<CoveringNet> {
        if v.len() != self.s {
            return Err(Error::DimensionMismatch { what: "net point", expected: self.s, found: v.len() });
        }
        let n = norm(v);
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NonUnitVector { norm: n });
        }
        if self.points.iter().any(|p| p.as_slice() == v) {
            return Ok(self.clone());
        }
        let mut points: Vec<Vec<f64>> = self.points.iter().filter(|p| dist(p, v) >= self.separation).cloned().collect();
        points.push(v.to_vec());
        Ok(CoveringNet { points, ..self.clone() })
    }

    /// Smallest pairwise distance, or infinity for fewer than two points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                best = best.min(dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn zero_sphere_has_two_points() {
        let net = build_separated_net(1, 1.0, 0).unwrap();
        let mut pts: Vec<f64> = net.points().iter().map(|p| p[0]).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, vec![-1.0, 1.0]);
        assert_eq!(net.points()[net.nearest(&[0.3]).unwrap()], vec![1.0]);
    }

    #[test]
    fn coarse_circle_net() {
        let net = build_separated_net(2, 2.0, 4).unwrap();
        assert!(net.len() as f64 <= 9.0);
        assert!(net.min_pairwise_distance() >= 1.0);
    }

    #[test]
    fn argument_errors() {
        assert!(build_separated_net(0, 1.0, 0).is_err());
        assert!(build_separated_net(2, 0.0, 0).is_err());
        assert!(build_separated_net(2, 2.5, 0).is_err());
        assert_eq!(
            build_with_pool(2, 1.0, 0, MAX_POOL + 1),
            Err(Error::PoolCapExceeded { requested: MAX_POOL + 1, cap: MAX_POOL })
        );
    }

    #[test]
    fn include_point_restores_separation() {
        let net = build_separated_net(2, 0.5, 1).unwrap();
        assert_eq!(net.include_point(&net.points()[3].clone()).unwrap(), net);
        // a quarter-epsilon rotation of point 0 is too close to point 0
        let p = &net.points()[0];
        let ang = 0.125;
        let v = vec![p[0] * libm::cos(ang) - p[1] * libm::sin(ang), p[0] * libm::sin(ang) + p[1] * libm::cos(ang)];
        let out = net.include_point(&v).unwrap();
        assert!(!out.points().contains(p));
        assert_eq!(out.points().last().unwrap(), &v);
        assert!(out.min_pairwise_distance() >= 0.25);
        assert!(matches!(net.include_point(&[0.5, 0.5]), Err(Error::NonUnitVector { .. })));
    }

    #[test]
    fn pool_is_covered() {
        let (s, eps, seed, pool) = (2, 0.4, 8, 3000);
        let net = build_with_pool(s, eps, seed, pool).unwrap();
        for c in candidate_pool(s, pool, seed) {
            let near = net.nearest_point(&c).unwrap();
            assert!(dist(near, &c) < eps / 2.0 || near == c.as_slice());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn separated_bounded_unit_and_deterministic(s in 1usize..4, eps in 0.6f64..2.0, seed in 0u64..1000) {
            let net = build_with_pool(s, eps, seed, 4000).unwrap();
            prop_assert!(net.min_pairwise_distance() >= eps / 2.0);
            prop_assert!(net.len() as f64 <= size_bound(s, eps));
            for p in net.points() {
                prop_assert!((norm(p) - 1.0).abs() <= 1e-9);
            }
            prop_assert_eq!(net, build_with_pool(s, eps, seed, 4000).unwrap());
        }

        #[test]
        fn nearest_matches_scan(seed in 0u64..1000, x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let net = build_with_pool(3, 1.0, seed, 500).unwrap();
            let i = net.nearest(&x).unwrap();
            let best = net.points().iter().map(|p| dist(p, &x)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(dist(&net.points()[i], &x), best);
        }

        #[test]
        fn include_any_unit_vector(seed in 0u64..1000, raw in proptest::collection::vec(-1.0f64..1.0, 2)) {
            prop_assume!(norm(&raw) > 1e-3);
            let n = norm(&raw);
            let v: Vec<f64> = raw.iter().map(|x| x / n).collect();
            prop_assume!((norm(&v) - 1.0).abs() <= 1e-9);
            let net = build_with_pool(2, 0.3, seed, 2000).unwrap().include_point(&v).unwrap();
            prop_assert!(net.min_pairwise_distance() >= 0.15);
            prop_assert!(net.points().iter().any(|p| p.as_slice() == v.as_slice()));
        }
    }
}
