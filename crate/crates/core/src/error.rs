use alloc::string::String;
use core::fmt;

/// Errors raised by the algorithms and constructors of this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must agree in length or dimension do not.
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    /// A feature matrix with zero rows or zero columns.
    EmptyFeatureMatrix,
    /// A feature row with Euclidean norm above one.
    RowNormExceedsOne { row: usize, norm: f64 },
    /// `|nu_i| > epsilon` for some action.
    MisspecificationExceedsEpsilon { index: usize, value: f64, epsilon: f64 },
    /// The parameter does not have exactly the declared number of nonzeros.
    SparsityMismatch { expected: usize, found: usize },
    /// The parameter has Euclidean norm above one.
    ParameterNormExceedsOne { norm: f64 },
    /// An action index outside `0..k`.
    IndexOutOfRange { index: usize, len: usize },
    /// A scalar argument outside its admissible range.
    InvalidArgument(String),
    /// A vector that should lie on the unit sphere does not.
    NonUnitVector { norm: f64 },
    /// A requested candidate pool larger than the hard cap.
    PoolCapExceeded { requested: usize, cap: usize },
    /// The rows have rank zero after column discarding.
    RankDeficient { rank: usize, columns: usize },
    /// A design matrix that is not positive definite.
    SingularDesign,
    /// Frank-Wolfe hit its iteration cap above the target value.
    DesignNotConverged { g_value: f64, target: f64, iterations: usize },
    /// A combinatorial size above the desk-scale limit.
    GuardExceeded { what: &'static str, size: f64, limit: f64 },
    /// Every candidate was eliminated.
    EmptySurvivors,
    /// No compression map passed certification within the retry budget.
    CertificationFailed { attempts: usize, best_violation: f64, allowed: f64 },
    /// The query budget cannot cover a single design round.
    BudgetTooSmall { budget: usize, needed: usize },
    /// A matrix with no nonzero entry where one is required.
    DegenerateMatrix,
    /// Hard-matrix generation exhausted its retries. Rates are the fraction
    /// of attempts failing the sparsity, norm and pairwise checks.
    HardMatrixRetriesExhausted { attempts: usize, sparsity_rate: f64, norm_rate: f64, pair_rate: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, found {found}")
            }
            Error::EmptyFeatureMatrix => f.write_str("feature matrix is empty"),
            Error::RowNormExceedsOne { row, norm } => {
                write!(f, "feature row {row} has norm {norm} > 1")
            }
            Error::MisspecificationExceedsEpsilon { index, value, epsilon } => write!(
                f,
                "misspecification exceeds epsilon: |nu[{index}]| = {} > {epsilon}",
                libm::fabs(*value)
            ),
            Error::SparsityMismatch { expected, found } => {
                write!(f, "parameter sparsity violated: expected {expected} nonzeros, found {found}")
            }
            Error::ParameterNormExceedsOne { norm } => {
                write!(f, "parameter norm {norm} exceeds 1")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "action index {index} out of range for {len} actions")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonUnitVector { norm } => write!(f, "vector is not unit norm (norm {norm})"),
            Error::PoolCapExceeded { requested, cap } => {
                write!(f, "candidate pool of {requested} exceeds the cap of {cap}")
            }
            Error::RankDeficient { rank, columns } => {
                write!(f, "rows have rank {rank} over {columns} columns")
            }
            Error::SingularDesign => f.write_str("design matrix is singular"),
            Error::DesignNotConverged { g_value, target, iterations } => write!(
                f,
                "Frank-Wolfe stopped after {iterations} iterations at g = {g_value} (target {target})"
            ),
            Error::GuardExceeded { what, size, limit } => {
                write!(f, "desk-scale guard: {what} = {size} exceeds {limit}")
            }
            Error::EmptySurvivors => f.write_str("every candidate was eliminated"),
            Error::CertificationFailed { attempts, best_violation, allowed } => write!(
                f,
                "no certified map in {attempts} attempts (best violation {best_violation}, allowed {allowed})"
            ),
            Error::BudgetTooSmall { budget, needed } => {
                write!(f, "query budget {budget} is below one design round ({needed} queries)")
            }
            Error::DegenerateMatrix => f.write_str("matrix has no nonzero entry"),
            Error::HardMatrixRetriesExhausted { attempts, sparsity_rate, norm_rate, pair_rate } => write!(
                f,
                "no valid hard matrix after {attempts} attempts (failure rates: sparsity {sparsity_rate:.3}, norm {norm_rate:.3}, pairwise {pair_rate:.3})"
            ),
        }
    }
}

impl core::error::Error for Error {}
