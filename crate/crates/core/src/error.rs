use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid service {service}: {reason}")]
    InvalidService { service: usize, reason: String },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid request matrix: {0}")]
    InvalidRequests(String),

    #[error("invalid lifetime: {0}")]
    InvalidLifetime(String),

    #[error("slot {slot}: server {server} stores {used} units but holds only {capacity}")]
    StorageExceeded {
        slot: usize,
        server: usize,
        used: u64,
        capacity: u64,
    },

    #[error("slot {slot}: service {service} at server {server} offloads to {target} which does not hold it")]
    InvalidOffload {
        slot: usize,
        service: usize,
        server: usize,
        target: String,
    },

    #[error("slot {slot}: lifetime of service {service} at server {server} is {found}, expected {expected}")]
    InconsistentLifetime {
        slot: usize,
        service: usize,
        server: usize,
        found: u32,
        expected: u32,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state space has {nodes} nodes, exceeding the budget of {budget}; use the DVA solver for instances this large")]
    NodeBudgetExceeded { nodes: u128, budget: u64 },

    #[error("exhaustive search over {sequences} placement sequences exceeds the guard of {guard}")]
    SearchGuardExceeded { sequences: u128, guard: u64 },

    #[error("LP with {variables} variables exceeds the guard of {guard}")]
    LpTooLarge { variables: usize, guard: usize },

    #[error("LP solver failed: {0}")]
    Lp(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ground set of {size} elements exceeds the limit of {limit}")]
    GroundSetTooLarge { size: usize, limit: usize },

    #[error("trace error: {0}")]
    Trace(String),
}
