use thiserror::Error;

/// Errors raised anywhere in the learning, inference and correction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("degenerate column `{name}`: {distinct} distinct values for {bins} bins")]
    DegenerateColumn {
        name: String,
        distinct: usize,
        bins: usize,
    },

    #[error("value {value} of `{name}` is out of range [{lower}, {upper}]")]
    OutOfRange {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("missing value for variable `{0}`")]
    MissingValue(String),

    #[error("type mismatch for variable `{0}`")]
    TypeMismatch(String),

    #[error("invalid state {state} for variable `{name}` with {cardinality} states")]
    InvalidState {
        name: String,
        state: usize,
        cardinality: usize,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid goal: {0}")]
    InvalidGoal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conditioning set too large: {size} > cap {cap}")]
    ConditioningSetTooLarge { size: usize, cap: usize },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("evidence starved: only {accepted} of {budget} samples accepted")]
    EvidenceStarved { accepted: usize, budget: usize },

    #[error("state space of {states} exceeds cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("no reachable success state after visiting {visited} assignments")]
    NoReachableSuccess { visited: usize },

    #[error("lattice of {size} assignments exceeds cap {cap}; use on-demand prevention")]
    LatticeTooLarge { size: u128, cap: u128 },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("structure learning failed: {0}")]
    Structure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
