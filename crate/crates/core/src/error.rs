use thiserror::Error;

use crate::tree::StructureReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("length mismatch: expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("node at depth {depth} is deeper than the tree depth {max}")]
    NodeTooDeep { depth: usize, max: usize },

    #[error("operation needs an even bit length, got {0}")]
    OddLength(usize),

    #[error("event has zero mass under the source")]
    ZeroMassEvent,

    #[error("entropy target {k} outside [0, {max}]")]
    EntropyOutOfRange { k: f64, max: f64 },

    #[error("thresholds must satisfy 0 < tau1 < tau2 < n, got tau1={tau1}, tau2={tau2}, n={n}")]
    InvalidThresholds { tau1: f64, tau2: f64, n: usize },

    #[error("k={k} is degenerate: sqrt(k) >= k - sqrt(k) - 1")]
    DegenerateThresholds { k: f64 },

    #[error("source min-entropy {actual} is below the required {required}")]
    EntropyPrecondition { required: f64, actual: f64 },

    #[error("no block-source found before the leaf level on branch {branch}")]
    DigExhausted { branch: String },

    #[error("deficiency {used} exceeds the budget {bound}")]
    BudgetExceeded { used: f64, bound: f64 },

    #[error("cannot pad {t} bits to {n}: lengths must be even with t <= n")]
    Padding { t: usize, n: usize },

    #[error("requested {m} output bits from an extractor on {n}-bit inputs")]
    OutputTooLong { m: usize, n: usize },

    #[error("table extractor supports at most {max} bits per argument, got {n}")]
    TableTooLarge { n: usize, max: usize },

    #[error("challenge width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("challenge function is not constant on the supports")]
    ChallengeNotConstant,

    #[error("invalid entropy-tree: {0:?}")]
    InvalidTree(Vec<String>),

    #[error("structure validation failed")]
    StructureFailed(Box<StructureReport>),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("exhaustive search needs {required} steps, budget is {budget}")]
    BudgetRefused { required: u128, budget: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
