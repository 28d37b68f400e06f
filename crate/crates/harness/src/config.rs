//! Experiment configs: one `key = value` per line, lists comma-separated,
//! `#` starts a comment. Integer lists also take half-open ranges `a..b`.
//!
//! ```text
//! algorithm = design-elim       # param-elim | design-elim | benign-elim | general-features | random-baseline
//! source = random               # random | hard | file
//! file = inst.txt               # source = file only
//! d = 3, 4, 5
//! s = 1, 2
//! epsilon = 0.05, 0.1
//! k = 16
//! gap = 0.25                    # planted reward gap for source = hard
//! seeds = 0..50
//! master_seed = 7
//! noise = none                  # none | gaussian
//! c_const = 2                   # elimination threshold constant
//! c_jl = 8                      # target-dimension constant
//! c = 2                         # hard-matrix constant
//! tau = 0.9                     # hard-row norm tolerance
//! kappa = 1                     # bound multiplier for benign-elim and general-features
//! budget = 400                  # query budget override
//! include_truth = false         # param-elim: add the true direction to the net
//! timing = false                # fill wall_ms
//! output = runs.csv
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    ParamElim,
    DesignElim,
    BenignElim,
    GeneralFeatures,
    RandomBaseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ParamElim => "param-elim",
            Algorithm::DesignElim => "design-elim",
            Algorithm::BenignElim => "benign-elim",
            Algorithm::GeneralFeatures => "general-features",
            Algorithm::RandomBaseline => "random-baseline",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Algorithm::ParamElim,
            Algorithm::DesignElim,
            Algorithm::BenignElim,
            Algorithm::GeneralFeatures,
            Algorithm::RandomBaseline,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Random,
    Hard,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub d: Vec<usize>,
    pub s: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub k: Vec<usize>,
    pub gap: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub c_const: f64,
    pub c_jl: f64,
    pub c: f64,
    pub tau: f64,
    pub kappa: f64,
    pub budget: Option<usize>,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c_const: 2.0, c_jl: 8.0, c: 2.0, tau: 0.9, kappa: 1.0, budget: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub source: Source,
    pub grid: Grid,
    pub constants: Constants,
    pub noisy: bool,
    pub master_seed: u64,
    pub timing: bool,
    /// Adds the normalized restriction of the true parameter to the
    /// parameter-elimination net (harness-side; reads the truth).
    pub include_truth: bool,
    pub output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "algorithm",
    "source",
    "file",
    "d",
    "s",
    "epsilon",
    "k",
    "gap",
    "seeds",
    "master_seed",
    "noise",
    "c_const",
    "c_jl",
    "c",
    "tau",
    "kappa",
    "budget",
    "timing",
    "include_truth",
    "output",
];

fn scalar<T: FromStr>(v: &str, key: &str, line: usize, path: &str) -> Result<T> {
    v.parse().map_err(|_| HarnessError::parse(path, line, format!("`{key}`: cannot parse `{v}`")))
}

fn items(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn real_list(v: &str, key: &str, line: usize, path: &str) -> Result<Vec<f64>> {
    items(v).map(|t| scalar(t, key, line, path)).collect()
}

fn int_list<T: FromStr + TryFrom<u64>>(v: &str, key: &str, line: usize, path: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for t in items(v) {
        if let Some((a, b)) = t.split_once("..") {
            let a: u64 = scalar(a.trim(), key, line, path)?;
            let b: u64 = scalar(b.trim(), key, line, path)?;
            for x in a..b {
                out.push(
                    T::try_from(x)
                        .map_err(|_| HarnessError::parse(path, line, format!("`{key}`: {x} out of range")))?,
                );
            }
        } else {
            out.push(scalar(t, key, line, path)?);
        }
    }
    Ok(out)
}

pub fn parse_config(text: &str, path: &str) -> Result<ExperimentConfig> {
    let mut seen = HashSet::new();
    let mut algorithm = None;
    let mut source = "random".to_string();
    let mut file = None;
    let mut grid = Grid { d: vec![], s: vec![], epsilon: vec![], k: vec![], gap: vec![0.25], seeds: vec![0] };
    let mut constants = Constants::default();
    let (mut noisy, mut master_seed, mut timing, mut include_truth, mut output) = (false, 0u64, false, false, None);

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| HarnessError::parse(path, line, "expected `key = value`"))?;
        if !KEYS.contains(&key) {
            return Err(HarnessError::parse(path, line, format!("unknown key `{key}`")));
        }
        if !seen.insert(key.to_string()) {
            return Err(HarnessError::parse(path, line, format!("duplicate key `{key}`")));
        }
        match key {
            "algorithm" => {
                algorithm = Some(value.parse::<Algorithm>().map_err(|m| HarnessError::parse(path, line, m))?)
            }
            "source" => match value {
                "random" | "hard" | "file" => source = value.to_string(),
                _ => return Err(HarnessError::parse(path, line, format!("unknown source `{value}`"))),
            },
            "file" => file = Some((PathBuf::from(value), line)),
            "d" => grid.d = int_list(value, key, line, path)?,
            "s" => grid.s = int_list(value, key, line, path)?,
            "k" => grid.k = int_list(value, key, line, path)?,
            "seeds" => grid.seeds = int_list(value, key, line, path)?,
            "epsilon" => grid.epsilon = real_list(value, key, line, path)?,
            "gap" => grid.gap = real_list(value, key, line, path)?,
            "master_seed" => master_seed = scalar(value, key, line, path)?,
            "noise" => {
                noisy = match value {
                    "none" => false,
                    "gaussian" => true,
                    _ => return Err(HarnessError::parse(path, line, format!("unknown noise `{value}`"))),
                }
            }
            "c_const" => constants.c_const = scalar(value, key, line, path)?,
            "c_jl" => constants.c_jl = scalar(value, key, line, path)?,
            "c" => constants.c = scalar(value, key, line, path)?,
            "tau" => constants.tau = scalar(value, key, line, path)?,
            "kappa" => constants.kappa = scalar(value, key, line, path)?,
            "budget" => constants.budget = Some(scalar(value, key, line, path)?),
            "timing" => timing = scalar(value, key, line, path)?,
            "include_truth" => include_truth = scalar(value, key, line, path)?,
            "output" => output = Some(PathBuf::from(value)),
            _ => unreachable!("key list and match arms agree"),
        }
    }
    let algorithm = algorithm.ok_or_else(|| HarnessError::Config(format!("{path}: missing `algorithm`")))?;
    let source = match (source.as_str(), file) {
        ("file", Some((f, _))) => {
            // relative instance paths resolve against the config's directory
            let base = Path::new(path).parent().unwrap_or(Path::new(""));
            Source::File(if f.is_relative() { base.join(f) } else { f })
        }
        ("file", None) => return Err(HarnessError::Config(format!("{path}: source = file needs `file`"))),
        (_, Some((_, line))) => return Err(HarnessError::parse(path, line, "`file` given but source is not `file`")),
        ("hard", None) => Source::Hard,
        _ => Source::Random,
    };
    if grid.epsilon.iter().chain(&grid.gap).any(|v| !(*v > 0.0)) {
        return Err(HarnessError::Config(format!("{path}: epsilon and gap values must be positive")));
    }
    Ok(ExperimentConfig { algorithm, source, grid, constants, noisy, master_seed, timing, include_truth, output })
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
