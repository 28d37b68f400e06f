//! Plain-text instance files.
//!
//! ```text
//! misspec-instance 1
//! kind sparse                      # or: kind hard <row sparsity> <orthogonality>
//! k 3
//! d 2
//! s 1
//! epsilon 1.0000000000000000e-1
//! noise none                       # or: noise gaussian <scale> <seed>
//! features
//! <k lines of d reals>
//! theta
//! <d reals>
//! misspec
//! <k reals>
//! ```
//!
//! Reals are written with 17 significant digits so they read back bit-exact.
//! Blank lines and `#` comments are ignored.

use std::path::Path;

use misspec_core::hard::certify_rows;
use misspec_core::linalg::norm;
use misspec_core::model::NORM_TOLERANCE;
use misspec_core::{BanditInstance, FeatureMatrix, NoiseKind, NoiseModel, SparseParameter};

use crate::error::{HarnessError, Result};

const MAGIC: &str = "misspec-instance 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceKind {
    Sparse,
    /// A planted-index instance; rows are unit norm, at most `row_sparsity`
    /// nonzeros, pairwise inner products within `orthogonality`.
    Hard {
        row_sparsity: usize,
        orthogonality: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub s: usize,
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub features: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub misspec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| real(*v)).collect::<Vec<_>>().join(" ")
}

impl InstanceFile {
    pub fn from_instance(instance: &BanditInstance, kind: InstanceKind) -> Self {
        let f = instance.features();
        Self {
            kind,
            s: instance.s(),
            epsilon: instance.epsilon(),
            noise: instance.noise().clone(),
            features: (0..f.k()).map(|i| f.row(i)).collect(),
            theta: instance.theta_star().coords().to_vec(),
            misspec: instance.misspec().to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.features.len()
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        match self.kind {
            InstanceKind::Sparse => out.push_str("kind sparse\n"),
            InstanceKind::Hard { row_sparsity, orthogonality } => {
                out.push_str(&format!("kind hard {row_sparsity} {}\n", real(orthogonality)))
            }
        }
        out.push_str(&format!("k {}\nd {}\ns {}\nepsilon {}\n", self.k(), self.d(), self.s, real(self.epsilon)));
        match self.noise.kind {
            NoiseKind::None => out.push_str("noise none\n"),
            NoiseKind::Gaussian => {
                out.push_str(&format!("noise gaussian {} {}\n", real(self.noise.scale), self.noise.seed))
            }
        }
        out.push_str("features\n");
        for row in &self.features {
            out.push_str(&join(row));
            out.push('\n');
        }
        out.push_str(&format!("theta\n{}\nmisspec\n{}\n", join(&self.theta), join(&self.misspec)));
        out
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let last = text.lines().count().max(1);
        let mut next =
            |what: &str| lines.next().ok_or_else(|| HarnessError::parse(path, last, format!("missing {what}")));

        let (n, l) = next("header")?;
        if l != MAGIC {
            return Err(HarnessError::parse(path, n, format!("expected `{MAGIC}`")));
        }
        let (n, l) = next("kind")?;
        let kind = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["kind", "sparse"] => InstanceKind::Sparse,
            ["kind", "hard", rs, orth] => {
                InstanceKind::Hard { row_sparsity: parse_num(rs, path, n)?, orthogonality: parse_num(orth, path, n)? }
            }
            _ => return Err(HarnessError::parse(path, n, "expected `kind sparse` or `kind hard <s> <level>`")),
        };
        let k: usize = keyed(next("k")?, "k", path)?;
        let d: usize = keyed(next("d")?, "d", path)?;
        let s: usize = keyed(next("s")?, "s", path)?;
        let epsilon: f64 = keyed(next("epsilon")?, "epsilon", path)?;
        let (n, l) = next("noise")?;
        let noise = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["noise", "none"] => NoiseModel::none(),
            ["noise", "gaussian", scale, seed] => NoiseModel {
                kind: NoiseKind::Gaussian,
                scale: parse_num(scale, path, n)?,
                seed: parse_num(seed, path, n)?,
            },
            _ => return Err(HarnessError::parse(path, n, "expected `noise none` or `noise gaussian <scale> <seed>`")),
        };
        let section = |(n, l): (usize, &str), name: &str| {
            if l == name {
                Ok(())
            } else {
                Err(HarnessError::parse(path, n, format!("expected section `{name}`")))
            }
        };
        section(next("features")?, "features")?;
        let mut features = Vec::with_capacity(k);
        for _ in 0..k {
            features.push(reals(next("feature row")?, d, path)?);
        }
        section(next("theta")?, "theta")?;
        let theta = reals(next("theta values")?, d, path)?;
        section(next("misspec")?, "misspec")?;
        let misspec = reals(next("misspec values")?, k, path)?;
        if let Some((n, _)) = lines.next() {
            return Err(HarnessError::parse(path, n, "unexpected trailing content"));
        }
        Ok(Self { kind, s, epsilon, noise, features, theta, misspec })
    }

    /// Every model invariant, each reported by name.
    pub fn check(&self) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |name, passed, detail: String| out.push(Check { name, passed, detail });
        push("epsilon positive", self.epsilon > 0.0 && self.epsilon.is_finite(), format!("epsilon = {}", self.epsilon));
        let max_norm = self.features.iter().map(|r| norm(r)).fold(0.0, f64::max);
        push(
            "feature rows have norm at most 1",
            max_norm <= 1.0 + NORM_TOLERANCE,
            format!("largest row norm {max_norm}"),
        );
        let nnz = self.theta.iter().filter(|v| **v != 0.0).count();
        push("parameter has exactly s nonzeros", nnz == self.s, format!("{nnz} nonzeros, s = {}", self.s));
        let worst = self
            .misspec
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        push(
            "misspecification within epsilon",
            self.misspec.iter().all(|v| v.abs() <= self.epsilon),
            format!("largest |nu| = {} at action {}", worst.1, worst.0),
        );
        match self.kind {
            InstanceKind::Sparse => {
                let n = norm(&self.theta);
                push("parameter norm at most 1", n <= 1.0 + NORM_TOLERANCE, format!("norm {n}"));
            }
            InstanceKind::Hard { row_sparsity, orthogonality } => {
                let ok = FeatureMatrix::from_rows(&self.features)
                    .map(|f| certify_rows(&f, row_sparsity, orthogonality))
                    .unwrap_or(false);
                push(
                    "rows unit norm, sparse and pairwise near-orthogonal",
                    ok,
                    format!("row sparsity {row_sparsity}, level {orthogonality}"),
                );
            }
        }
        out
    }

    /// Builds the in-memory instance. Planted-index parameters skip the
    /// norm check.
    pub fn build(&self) -> Result<BanditInstance> {
        let features = FeatureMatrix::from_rows(&self.features)?;
        let theta = match self.kind {
            InstanceKind::Sparse => SparseParameter::new(self.theta.clone(), self.s)?,
            InstanceKind::Hard { .. } => SparseParameter::embedded(self.theta.clone()),
        };
        Ok(BanditInstance::new(features, theta, self.misspec.clone(), self.epsilon, self.noise.clone())?)
    }
}

fn parse_num<T: std::str::FromStr>(token: &str, path: &str, line: usize) -> Result<T> {
    token.parse().map_err(|_| HarnessError::parse(path, line, format!("cannot parse `{token}`")))
}

fn keyed<T: std::str::FromStr>((n, l): (usize, &str), key: &str, path: &str) -> Result<T> {
    match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        [k, v] if *k == key => parse_num(v, path, n),
        _ => Err(HarnessError::parse(path, n, format!("expected `{key} <value>`"))),
    }
}

fn reals((n, l): (usize, &str), count: usize, path: &str) -> Result<Vec<f64>> {
    let values = l.split_whitespace().map(|t| parse_num(t, path, n)).collect::<Result<Vec<f64>>>()?;
    if values.len() != count {
        return Err(HarnessError::parse(path, n, format!("expected {count} values, found {}", values.len())));
    }
    Ok(values)
}

pub fn read_instance(path: &Path) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    InstanceFile::parse(&text, &path.display().to_string())
}

pub fn write_instance(path: &Path, file: &InstanceFile) -> Result<()> {
    std::fs::write(path, file.to_text()).map_err(|e| HarnessError::io(path, e))
}
