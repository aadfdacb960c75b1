use thiserror::Error;

/// Errors raised by mesh handling, tracing, projection and the time stepper.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("degenerate triangle {tri} (area {area:e})")]
    DegenerateTriangle { tri: usize, area: f64 },

    #[error("degenerate element {tri}: edge block condition number {cond:e}")]
    DegenerateElement { tri: usize, cond: f64 },

    #[error("segment start point is not inside element {0}")]
    InvalidStart(usize),

    #[error("segment walk exceeded {0} element visits")]
    TraceOverflow(usize),

    #[error("trace failed for edge {edge}: {source}")]
    EdgeTrace {
        edge: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point ({0}, {1}) lies outside the meshed domain")]
    OutsideDomain(f64, f64),

    #[error("linear solve failed: relative residual {residual:e}")]
    LinearSolve { residual: f64 },

    #[error("energy constraint iteration did not converge after {iterations} iterations (increment {increment:e})")]
    NoConvergence { iterations: usize, increment: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
