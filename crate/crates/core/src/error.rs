use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("deadline {deadline_s}s is shorter than two slots of {slot_s}s")]
    InfeasibleDeadline { deadline_s: f64, slot_s: f64 },

    #[error("allocation {alloc} exceeds queue {queue} occupancy {occupancy}")]
    AllocationExceedsQueue { queue: usize, alloc: u64, occupancy: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative arrival prediction {0}")]
    NegativeArrival(i64),

    #[error("LP solution is not integral: variable {var} = {value}")]
    NonIntegralSolution { var: usize, value: f64 },

    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("rounded LP solution violates row {0}")]
    InfeasibleRounding(usize),

    #[error("negative budget: forced allocations {forced} exceed slot capacity {capacity}")]
    NegativeBudget { forced: u64, capacity: u64 },

    #[error("search space of {0} points exceeds the enumeration guard")]
    SearchSpaceTooLarge(u128),

    #[error("matrix with {0} rows is too large for exhaustive checking")]
    MatrixTooLarge(usize),

    #[error("matrix entry {0} is not in {{-1, 0, 1}}")]
    NonTernaryEntry(i64),

    #[error("invalid hurst parameter {0}, expected a value in (0, 1)")]
    InvalidHurst(f64),

    #[error("invalid source configuration: {0}")]
    InvalidSource(String),

    #[error("slot of {slot_s}s cannot fit {n_onus} guard intervals of {guard_s}s")]
    SlotTooShort { slot_s: f64, n_onus: usize, guard_s: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown allocator `{0}`")]
    UnknownAllocator(String),

    #[error("grant schedule invalid: {0}")]
    InvalidGrant(String),

    #[error("ledger and virtual queues diverged for onu {onu} class {class}: {ledger} vs {bank}")]
    LedgerMismatch { onu: usize, class: usize, ledger: u64, bank: u64 },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("{0}")]
    EmptyInput(String),

    #[error("trace format: {0}")]
    Trace(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
