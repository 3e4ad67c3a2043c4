use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("series did not converge within {max_index} symmetric terms (partial sum {partial:e})")]
    SeriesDiverged { max_index: usize, partial: f64 },

    #[error("quadrature stalled at {evals} evaluations: estimate {estimate:e}, error bound {error:e} above tolerance")]
    QuadratureTolerance {
        estimate: f64,
        error: f64,
        evals: usize,
    },

    #[error("no sign change for {what} in bracket [{lo:e}, {hi:e}]")]
    BracketFailure { what: &'static str, lo: f64, hi: f64 },

    #[error("power budget {budget:e} infeasible for {scheme}: {reason}")]
    Infeasible {
        scheme: &'static str,
        budget: f64,
        reason: String,
    },

    #[error("decoder table denominator underflowed across the whole grid")]
    DegenerateDecoder,

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("descent stalled: {0}")]
    Stalled(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
