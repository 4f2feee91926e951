use thiserror::Error;

/// Errors produced by the simulator and its analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid map definition: {0}")]
    InvalidMap(String),

    #[error("state {x} lies outside ({lo}, {hi}) beyond the guard band {guard}")]
    OutOfDomain { x: f64, lo: f64, hi: f64, guard: f64 },

    /// An orbit left the guard band. `stage` and `clock` are set for pipeline runs.
    #[error("orbit escaped at step {step} (x = {x}){}", fmt_location(*.stage, *.clock))]
    OrbitEscape {
        step: usize,
        x: f64,
        stage: Option<usize>,
        clock: Option<usize>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_location(stage: Option<usize>, clock: Option<usize>) -> String {
    match (stage, clock) {
        (Some(s), Some(c)) => format!(" in stage {s} at clock {c}"),
        (Some(s), None) => format!(" in stage {s}"),
        _ => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
