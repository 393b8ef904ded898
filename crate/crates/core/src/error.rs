use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid growth function: {0}")]
    InvalidGrowth(String),

    #[error("argument {x} is outside the domain [{start}, inf)")]
    Domain { x: f64, start: f64 },

    #[error("singular recursion denominator {value:e} at x = {x}")]
    Singularity { x: f64, value: f64 },

    #[error("inversion of y = {y} did not converge; last bracket [{lo}, {hi}]")]
    Convergence { y: f64, lo: f64, hi: f64 },

    #[error("floor of {value} is numerically undecidable at p = {p}")]
    Ambiguous { p: i64, value: f64 },

    #[error("value h({m}) = {value} overflows the 64-bit integer range")]
    Overflow { m: i64, value: f64 },

    #[error("{what} = {value} out of range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty summation range ({lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("output support {len} exceeds the limit {limit}")]
    SizeOverflow { len: usize, limit: usize },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

impl Error {
    /// Numeric failures (as opposed to invalid inputs).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singularity { .. }
                | Error::Convergence { .. }
                | Error::Ambiguous { .. }
                | Error::Overflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
