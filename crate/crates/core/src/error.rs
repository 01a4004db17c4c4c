use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Graph(String),
    #[error("io: {0}")]
    Io(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("memory budget exceeded at vertex {vertex} in round {round}: {bits} > {budget} bits (largest slot {slot})")]
    Memory { vertex: u32, round: u64, slot: String, bits: u64, budget: u64 },
    #[error("{protocol}: round cap {cap} exceeded")]
    RoundCap { protocol: String, cap: u64 },
    #[error("message of {bits} bits exceeds macro-round capacity of {capacity} bits")]
    Capacity { bits: u64, capacity: u64 },
    #[error("congestion at vertex {vertex} in round {round}: {detail}")]
    Congestion { vertex: u32, round: u64, detail: String },
    #[error("{protocol} at vertex {vertex}: {msg}")]
    Protocol { protocol: String, vertex: u32, msg: String },
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Handler-side fault; the engine adds the protocol name and vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    Congestion(String),
    Protocol(String),
}

impl Fault {
    pub fn protocol(msg: impl Into<String>) -> Self {
        Fault::Protocol(msg.into())
    }
}
