use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("the single lattice is not reconstructing for this frequency set")]
    NotReconstructing,

    /// No candidate prime achieved the halving condition. The existence
    /// argument behind the candidate set rules this out, so hitting it means
    /// an internal inconsistency.
    #[error(
        "candidate primes exhausted in round {round}: {active} active frequencies, \
         {scanned} of {candidates} candidates scanned starting at {first}"
    )]
    CandidateExhausted {
        round: usize,
        active: usize,
        scanned: u64,
        candidates: u64,
        first: u64,
    },

    #[error("lattice search exhausted: no reconstructing prime lattice up to {limit}")]
    SearchExhausted { limit: u64 },

    #[error("variant mismatch: operation needs a {expected} plan, got {found}")]
    VariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("plan certificate violated: {0}")]
    Certificate(String),

    #[error("evaluation failed on lattice {lattice} at node {node}: {msg}")]
    Evaluation { lattice: usize, node: u64, msg: String },

    #[error("frequency component {component} outside coefficient table (|k| <= {k_max})")]
    OutsideTable { component: i64, k_max: usize },

    #[error("coefficient tail estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    TailTooLarge { estimate: f64, tolerance: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that indicate a bug or a broken invariant rather
    /// than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::CandidateExhausted { .. } | Error::SearchExhausted { .. } | Error::Certificate(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
