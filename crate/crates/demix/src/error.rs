use thiserror::Error;

/// Crate-wide error type. Pipeline stages wrap causes with a stage tag so a
/// failure deep in a sub-stage still names its position in the run.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model parameters (weights, centers, sigma, dimensions).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Config field failed validation; `field` is a dotted path.
    #[error("config error at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Mathematical precondition violated (empty sets, bad log arguments, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough samples for the requested operation.
    #[error("insufficient data: need {need}, have {have}")]
    InsufficientData { need: usize, have: usize },

    /// No unique augmented center matched a base center during patch-up.
    #[error("patch ambiguity: base center {base} has {matches} matches in subproblem {subproblem} (tol {tol})")]
    PatchAmbiguity {
        base: usize,
        subproblem: usize,
        matches: usize,
        tol: f64,
    },

    /// Frame redraw budget exhausted without a usable spike set.
    #[error("retries exhausted after {attempts} projection frames")]
    RetriesExhausted { attempts: usize },

    /// Lattice enumeration would exceed the configured cap.
    #[error("lattice too large: estimated {estimate} points exceeds cap {cap}")]
    LatticeTooLarge { estimate: u128, cap: u128 },

    /// A spike-search run kept no candidates after filtering.
    #[error("no spike candidates survived filtering")]
    NoSpikes,

    /// No run satisfied the consensus majority condition.
    #[error(
        "consensus failure: no run of cardinality {cardinality} agreed with half of {runs} runs"
    )]
    ConsensusFailure { cardinality: usize, runs: usize },

    /// An augmented subproblem disagreed with the base on the center count.
    #[error("augmented subproblem {subproblem} found {found} centers, base found {base}")]
    CardinalityMismatch {
        subproblem: usize,
        found: usize,
        base: usize,
    },

    /// A mixture component received (numerically) zero responsibility mass.
    #[error("starved component {component}: responsibility mass {mass:.3e}")]
    StarvedComponent { component: usize, mass: f64 },

    /// I/O failure, with the path that caused it.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed serialized data (JSON/CSV).
    #[error("parse error: {0}")]
    Parse(String),

    /// A pipeline stage failed; carries the stage tag and the cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with a pipeline stage tag.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
