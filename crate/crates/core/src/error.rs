use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("field support insufficient: point ({x:.6}, {y:.6}) lies outside the sampled box")]
    FieldSupport { x: f64, y: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("fields not gauge-equivalent: relative curl mismatch {mismatch:.3e} exceeds {tol:.3e}")]
    NotGaugeEquivalent { mismatch: f64, tol: f64 },

    #[error("magnetic flux per plaquette too large: sigma*h^2 = {0:.4} > 1")]
    FluxTooLarge(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        /// Best iterate found, flattened as interleaved (re, im) or plain reals.
        best: Vec<f64>,
    },

    #[error("descent failed after {iterations} iterations (residual {residual:.3e}); trace: {trace}")]
    DescentFailed { iterations: usize, residual: f64, trace: String },

    #[error("no admissible center: {0}")]
    NoAdmissibleCenter(String),

    #[error("increase R_max: bracket width {width:.3e} above tolerance {tol:.3e}")]
    BracketTooWide { width: f64, tol: f64 },

    #[error("unordered table: {0}")]
    UnorderedTable(String),

    #[error("degenerate order parameter (normal state reached): choose smaller b / larger a")]
    DegenerateOrderParameter,

    #[error("reduced minimization failed on cell ({cx:.4}, {cy:.4}): {source}")]
    CellFailure {
        cx: f64,
        cy: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
