//! `generate-hard` spec files, same `key = value` grammar as configs.
//!
//! ```text
//! d = 64
//! s = 8
//! epsilon = 0.5          # pairwise orthogonality level
//! tau = 0.1
//! delta = 0.25
//! c = 2
//! seed = 0
//! k = 40                 # optional; defaults to the row-count threshold
//! mode = matrix          # matrix (whole-draw rejection) | rowwise
//! gap = 0.25             # planted reward gap
//! i_star = 0
//! ```
//!
//! The written instance has misspecification level `2 * gap * epsilon`.

use std::io::Write;

use misspec_core::hard::{
    embed_index_query, k_threshold, normalize_and_validate, sample_raw_matrix, sample_rowwise, HardMatrixSpec,
    MAX_RETRIES,
};
use misspec_core::FeatureMatrix;

use crate::error::{HarnessError, Result};
use crate::instance_file::{InstanceFile, InstanceKind};
use crate::runner::HARD_MAX_DRAWS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Matrix,
    Rowwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardGenSpec {
    pub matrix: HardMatrixSpec,
    pub mode: Mode,
    pub gap: f64,
    pub i_star: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub seed: u64,
    pub condition: &'static str,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct HardOutput {
    pub file: InstanceFile,
    pub seed: u64,
    pub rejections: Vec<Rejection>,
}

pub fn parse_hard_spec(text: &str, path: &str) -> Result<HardGenSpec> {
    let mut values = std::collections::BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) =
            content.split_once('=').ok_or_else(|| HarnessError::parse(path, i + 1, "expected `key = value`"))?;
        let key = k.trim();
        if !["d", "s", "epsilon", "tau", "delta", "c", "seed", "k", "mode", "gap", "i_star"].contains(&key) {
            return Err(HarnessError::parse(path, i + 1, format!("unknown key `{key}`")));
        }
        if values.insert(key.to_string(), (v.trim().to_string(), i + 1)).is_some() {
            return Err(HarnessError::parse(path, i + 1, format!("duplicate key `{key}`")));
        }
    }
    fn get<T: std::str::FromStr>(
        values: &std::collections::BTreeMap<String, (String, usize)>,
        key: &str,
        default: Option<T>,
        path: &str,
    ) -> Result<T> {
        match values.get(key) {
            Some((v, line)) => {
                v.parse().map_err(|_| HarnessError::parse(path, *line, format!("`{key}`: cannot parse `{v}`")))
            }
            None => default.ok_or_else(|| HarnessError::Config(format!("{path}: missing `{key}`"))),
        }
    }
    let mut matrix = HardMatrixSpec {
        k: 0,
        d: get(&values, "d", None, path)?,
        s: get(&values, "s", None, path)?,
        epsilon: get(&values, "epsilon", None, path)?,
        tau: get(&values, "tau", Some(0.1), path)?,
        delta: get(&values, "delta", Some(0.25), path)?,
        c: get(&values, "c", Some(2.0), path)?,
        seed: get(&values, "seed", Some(0), path)?,
    };
    matrix.validate().map_err(|e| HarnessError::Config(format!("{path}: {e}")))?;
    matrix.k = match values.get("k") {
        Some(_) => get(&values, "k", None, path)?,
        None => {
            let t = k_threshold(&matrix)?;
            if t.saturated {
                return Err(HarnessError::Config(format!("{path}: row-count threshold saturated; give `k`")));
            }
            t.k as usize
        }
    };
    let mode = match get::<String>(&values, "mode", Some("matrix".into()), path)?.as_str() {
        "matrix" => Mode::Matrix,
        "rowwise" => Mode::Rowwise,
        other => return Err(HarnessError::Config(format!("{path}: unknown mode `{other}`"))),
    };
    let gap = get(&values, "gap", Some(0.25), path)?;
    let i_star = get(&values, "i_star", Some(0), path)?;
    Ok(HardGenSpec { matrix, mode, gap, i_star })
}

/// Draws (and for `matrix` mode, retries) a validated family, then plants
/// the index.
pub fn generate(spec: &HardGenSpec) -> Result<HardOutput> {
    let m = spec.matrix;
    let mut rejections = Vec::new();
    let (features, seed): (FeatureMatrix, u64) = match spec.mode {
        Mode::Rowwise => (sample_rowwise(&m, HARD_MAX_DRAWS)?, m.seed),
        Mode::Matrix => {
            let mut found = None;
            let mut fails = [0usize; 3];
            for attempt in 0..MAX_RETRIES {
                let trial = HardMatrixSpec { seed: m.seed.wrapping_add(attempt as u64), ..m };
                let report = normalize_and_validate(&sample_raw_matrix(&trial)?.matrix, &trial)?;
                for (slot, (condition, count)) in [
                    ("sparsity", report.sparsity_failures),
                    ("norm", report.norm_failures),
                    ("pairwise", report.pair_failures),
                ]
                .into_iter()
                .enumerate()
                {
                    if count > 0 {
                        fails[slot] += 1;
                        rejections.push(Rejection { seed: trial.seed, condition, count });
                    }
                }
                if let Some(f) = report.features {
                    found = Some((f, trial.seed));
                    break;
                }
            }
            found.ok_or_else(|| {
                let rate = |c: usize| c as f64 / MAX_RETRIES as f64;
                HarnessError::Core(misspec_core::Error::HardMatrixRetriesExhausted {
                    attempts: MAX_RETRIES,
                    sparsity_rate: rate(fails[0]),
                    norm_rate: rate(fails[1]),
                    pair_rate: rate(fails[2]),
                })
            })?
        }
    };
    let instance = embed_index_query(&features, spec.i_star, spec.gap, 2.0 * spec.gap * m.epsilon)?;
    let kind = InstanceKind::Hard { row_sparsity: m.s, orthogonality: m.epsilon };
    Ok(HardOutput { file: InstanceFile::from_instance(&instance, kind), seed, rejections })
}

/// Rejection report: one row per failed condition per attempt.
pub fn write_rejections<W: Write>(rejections: &[Rejection], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "count", "seed"])?;
    for r in rejections {
        w.write_record([r.condition.to_string(), r.count.to_string(), r.seed.to_string()])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}
