use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("LFSR state is all-zero")]
    DegenerateState,

    #[error("synchronization error: receiver at qumode {expected}, frame starts at {found}")]
    Sync { expected: u64, found: u64 },

    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {error:e} after {evaluations} evaluations")]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("work cap exceeded: {requested} states requested, cap is {cap}")]
    WorkCap { requested: u64, cap: u64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
