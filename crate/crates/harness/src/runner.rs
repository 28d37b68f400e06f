//! Grid expansion, guard checks, runs and CSV records.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use misspec_core::benign::{compressed_error, noise_term, run_with_certified_map, BenignParams};
use misspec_core::design_elim::{self, certificate_width, run_design_elimination};
use misspec_core::general::{error_bound_shape, run_general_features, GeneralParams};
use misspec_core::hard::{embed_index_query, sample_rowwise, HardMatrixSpec};
use misspec_core::net::{build_separated_net, CoveringNet};
use misspec_core::param_elim::{self, run_parameter_elimination};
use misspec_core::random::{mix_seed, random_sparse_instance, random_subset, seeded, RandomInstanceSpec};
use misspec_core::{query, BanditInstance, NoiseModel, QueryLedger};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentConfig, Source};
use crate::error::{HarnessError, Result};
use crate::instance_file::read_instance;

/// Candidate rows drawn before a planted-index family is abandoned.
pub const HARD_MAX_DRAWS: usize = 1_000_000;

pub const CSV_HEADER: [&str; 12] = [
    "algorithm",
    "d",
    "s",
    "epsilon",
    "k",
    "seed",
    "queries",
    "uniform_error",
    "suboptimality",
    "bound",
    "bound_satisfied",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    pub k: usize,
    pub gap: f64,
    pub seed: u64,
    /// Seed for everything random in this run, from the master seed, the
    /// point's position in the grid and its listed seed.
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    pub k: usize,
    pub seed: u64,
    pub queries: usize,
    pub uniform_error: f64,
    pub suboptimality: f64,
    pub bound: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl RunRecord {
    pub fn bound_satisfied(&self) -> Option<bool> {
        self.bound.map(|b| self.uniform_error <= b)
    }
}

/// Points in `(d, s, epsilon, k, gap)` order with seeds innermost. A file
/// source contributes one point per seed with the file's dimensions.
pub fn expand(config: &ExperimentConfig) -> Result<Vec<GridPoint>> {
    let g = &config.grid;
    let mut out = Vec::new();
    if let Source::File(path) = &config.source {
        let f = read_instance(path)?;
        for &seed in &g.seeds {
            let stream = mix_seed(mix_seed(config.master_seed, 0), seed);
            out.push(GridPoint { d: f.d(), s: f.s, epsilon: f.epsilon, k: f.k(), gap: 0.0, seed, stream });
        }
        return Ok(out);
    }
    let mut index = 0u64;
    for &d in &g.d {
        for &s in &g.s {
            for &epsilon in &g.epsilon {
                for &k in &g.k {
                    for &gap in &g.gap {
                        for &seed in &g.seeds {
                            let stream = mix_seed(mix_seed(config.master_seed, index), seed);
                            out.push(GridPoint { d, s, epsilon, k, gap, seed, stream });
                        }
                        index += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn build_instance(config: &ExperimentConfig, p: &GridPoint) -> Result<BanditInstance> {
    let noise = if config.noisy { NoiseModel::gaussian(mix_seed(p.stream, 1)) } else { NoiseModel::none() };
    match &config.source {
        Source::Random => Ok(random_sparse_instance(&RandomInstanceSpec {
            k: p.k,
            d: p.d,
            s: p.s,
            epsilon: p.epsilon,
            seed: p.stream,
            noise,
        })?),
        Source::Hard => {
            let spec = HardMatrixSpec {
                k: p.k,
                d: p.d,
                s: p.s,
                epsilon: p.epsilon / (2.0 * p.gap),
                tau: config.constants.tau,
                delta: 1.0,
                c: config.constants.c,
                seed: p.stream,
            };
            let features = sample_rowwise(&spec, HARD_MAX_DRAWS)?;
            let i_star = (p.stream % p.k as u64) as usize;
            Ok(embed_index_query(&features, i_star, p.gap, p.epsilon)?.with_noise(noise))
        }
        Source::File(path) => {
            let inst = read_instance(path)?.build()?;
            Ok(if config.noisy { inst.with_noise(noise) } else { inst })
        }
    }
}

struct Prepared {
    point: GridPoint,
    instance: BanditInstance,
    net: Option<CoveringNet>,
}

fn prepare(config: &ExperimentConfig, point: GridPoint) -> Result<std::result::Result<Prepared, String>> {
    let instance = build_instance(config, &point)?;
    let (d, s) = (instance.d(), instance.s());
    let mut net = None;
    let guard = match config.algorithm {
        Algorithm::ParamElim => {
            let mut n = build_separated_net(s, point.epsilon, point.stream)?;
            if config.include_truth {
                let star = instance.theta_star();
                let restricted: Vec<f64> = star.support().iter().map(|&j| star.coords()[j]).collect();
                let len = misspec_core::linalg::norm(&restricted);
                n = n.include_point(&restricted.iter().map(|v| v / len).collect::<Vec<_>>())?;
            }
            let g = param_elim::check_guard(d, s, n.len());
            net = Some(n);
            g
        }
        Algorithm::DesignElim | Algorithm::GeneralFeatures => design_elim::check_guard(d, s),
        Algorithm::BenignElim | Algorithm::RandomBaseline => Ok(()),
    };
    Ok(match guard {
        Ok(()) => Ok(Prepared { point, instance, net }),
        Err(e) => Err(format!("d={d} s={s} epsilon={} k={} seed={}: {e}", point.epsilon, point.k, point.seed)),
    })
}

fn best_by(instance: &BanditInstance, candidates: &[usize], predict: impl Fn(usize) -> f64) -> f64 {
    let mut best = candidates[0];
    for &a in &candidates[1..] {
        if predict(a) > predict(best) {
            best = a;
        }
    }
    let top = instance.rewards().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top - instance.rewards()[best]
}

fn row_dot(instance: &BanditInstance, a: usize, theta: &[f64]) -> f64 {
    instance.features().matrix().row(a).iter().zip(theta).map(|(x, y)| x * y).sum()
}

fn execute(config: &ExperimentConfig, prep: &Prepared) -> Result<RunRecord> {
    let Prepared { point, instance, net } = prep;
    let c = &config.constants;
    let (k, eps) = (instance.k(), point.epsilon);
    let all: Vec<usize> = (0..k).collect();
    let mut ledger = QueryLedger::new();
    let start = Instant::now();
    let (uniform_error, suboptimality, bound) = match config.algorithm {
        Algorithm::ParamElim => {
            let net = net.as_ref().expect("prepared with a net");
            let out = run_parameter_elimination(instance, net, &mut ledger)?;
            let dense = out.estimate.to_dense(instance.d());
            (
                out.estimate.uniform_error(instance),
                best_by(instance, &all, |a| row_dot(instance, a, &dense)),
                Some(4.0 * eps),
            )
        }
        Algorithm::DesignElim => {
            let out = run_design_elimination(instance, &mut ledger)?;
            let dense = out.estimate.to_dense(instance.d());
            let bound = 3.0 * certificate_width(instance.s(), eps);
            (
                out.estimate.uniform_error(instance),
                best_by(instance, &all, |a| row_dot(instance, a, &dense)),
                Some(bound),
            )
        }
        Algorithm::BenignElim => {
            let params = BenignParams { c_const: c.c_const, c_jl: c.c_jl, budget: c.budget, map_seed: point.stream };
            let (out, map) = run_with_certified_map(instance, &params, &mut ledger)?;
            let compressed = map.apply_rows(instance.features().matrix());
            let pred = |a: usize| compressed.row(a).iter().zip(&out.theta_f).map(|(x, y)| x * y).sum::<f64>();
            let root = (k.max(2) as f64).ln().powf(0.25) * eps.sqrt();
            // noiseless: first-round estimate over every action; noisy: the
            // final estimate over the actions its design covered, at the
            // query count it was fitted with
            let (err, bound) = match out.rounds.last().filter(|_| instance.noise().is_noisy()) {
                Some(last) => {
                    let n = params.budget.unwrap_or_else(|| misspec_core::benign::default_budget(k, eps, map.p()));
                    let err = compressed_error(instance, &last.active, &map, &out.theta_f);
                    (err, c.kappa * (root + noise_term(map.p(), last.cumulative_queries.max(1), k, n)))
                }
                None => (compressed_error(instance, &all, &map, &out.first_theta_f), c.kappa * (root + eps)),
            };
            (err, best_by(instance, &out.survivors, pred), Some(bound))
        }
        Algorithm::GeneralFeatures => {
            let params = GeneralParams { c_const: c.c_const, c_jl: c.c_jl, budget: c.budget, map_seed: point.stream };
            let out = run_general_features(instance, &params, &mut ledger)?;
            let theta = out.recovery.theta.clone();
            let bound = c.kappa * error_bound_shape(instance.s(), instance.d(), eps);
            (
                out.estimate().uniform_error(instance),
                best_by(instance, &all, |a| row_dot(instance, a, &theta)),
                Some(bound),
            )
        }
        Algorithm::RandomBaseline => {
            let budget = c.budget.unwrap_or(k.min(2 * instance.d())).min(k);
            let mut rng = seeded(point.stream);
            let picked = random_subset(&mut rng, k, budget);
            let mut rewards = Vec::with_capacity(budget);
            for &a in &picked {
                rewards.push(query(instance, a, &mut ledger)?);
            }
            let theta = least_squares(&instance.features().select_rows(&picked), &rewards)
                .ok_or_else(|| HarnessError::Invariant("least-squares fit failed".into()))?;
            let idx: Vec<usize> = (0..instance.d()).collect();
            let err = misspec_core::uniform_error(instance, &theta, &idx);
            let observed = |a: usize| rewards[picked.iter().position(|p| *p == a).expect("picked")];
            (err, best_by(instance, &picked, observed), None)
        }
    };
    let wall_ms = config.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(RunRecord {
        algorithm: config.algorithm,
        d: point.d,
        s: point.s,
        epsilon: eps,
        k: point.k,
        seed: point.seed,
        queries: ledger.len(),
        uniform_error,
        suboptimality,
        bound,
        wall_ms,
    })
}

/// Builds every instance and checks every guard, then runs the grid in
/// parallel. Records come back in grid order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let points = expand(config)?;
    let prepared: Vec<_> = points.into_par_iter().map(|p| prepare(config, p)).collect::<Result<Vec<_>>>()?;
    let violations: Vec<String> = prepared.iter().filter_map(|p| p.as_ref().err().cloned()).collect();
    if !violations.is_empty() {
        return Err(HarnessError::Guard(violations));
    }
    let prepared: Vec<Prepared> = prepared.into_iter().map(|p| p.expect("no violations")).collect();
    prepared.par_iter().map(|p| execute(config, p)).collect()
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.algorithm.name().to_string(),
            r.d.to_string(),
            r.s.to_string(),
            r.epsilon.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            r.queries.to_string(),
            r.uniform_error.to_string(),
            r.suboptimality.to_string(),
            opt(r.bound),
            r.bound_satisfied().map(|b| b.to_string()).unwrap_or_default(),
            opt(r.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    pub k: usize,
    pub runs: usize,
    pub mean_queries: f64,
    pub max_error: f64,
    /// Worst `uniform_error / bound`, when there is a bound.
    pub worst_ratio: Option<f64>,
    pub satisfied: usize,
}

/// Per `(d, s, epsilon, k)` aggregates, in first-appearance order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.d, r.s, r.epsilon.to_bits(), r.k);
        let pos = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        groups.entry(pos).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let first = rs[0];
            let ratios: Vec<f64> = rs.iter().filter_map(|r| r.bound.map(|b| r.uniform_error / b)).collect();
            SummaryRow {
                algorithm: first.algorithm,
                d: first.d,
                s: first.s,
                epsilon: first.epsilon,
                k: first.k,
                runs: rs.len(),
                mean_queries: rs.iter().map(|r| r.queries as f64).sum::<f64>() / rs.len() as f64,
                max_error: rs.iter().map(|r| r.uniform_error).fold(0.0, f64::max),
                worst_ratio: (!ratios.is_empty()).then(|| ratios.iter().copied().fold(0.0, f64::max)),
                satisfied: rs.iter().filter(|r| r.bound_satisfied() == Some(true)).count(),
            }
        })
        .collect()
}

/// Minimum-norm least-squares fit.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Option<Vec<f64>> {
    x.clone().svd(true, true).solve(&DVector::from_column_slice(y), 1e-12).ok().map(|v| v.iter().copied().collect())
}
