use thiserror::Error;

/// Errors produced by loaders, calibration and the iterative engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row in {path} (line {line}): {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error("edge references unknown firm id {firm} in {path} (line {line})")]
    DanglingFirm { path: String, line: u64, firm: u64 },

    #[error("loan references unknown {what} id {id} in {path} (line {line})")]
    DanglingLoan {
        path: String,
        line: u64,
        what: &'static str,
        id: u64,
    },

    #[error("self-loop on firm {firm} in {path} (line {line})")]
    SelfLoop { path: String, line: u64, firm: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "cost pass-through did not reach coverage {coverage} within {iterations} iterations; \
         undistributed residual {residual:.6e} ({residual_fraction:.3e} of initial costs)"
    )]
    PassThroughStalled {
        coverage: f64,
        iterations: usize,
        residual: f64,
        residual_fraction: f64,
    },

    #[error("contagion did not converge within {iterations} iterations (max delta {max_delta:.3e})")]
    ContagionStalled { iterations: usize, max_delta: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("calibration failed for firm {firm}: baseline output {output} != out-strength {s_out}")]
    Calibration { firm: usize, output: f64, s_out: f64 },

    #[error("scenario cell failed (price {price}, pass_through {pass_through}, fn {production_fn}): {source}")]
    Cell {
        price: f64,
        pass_through: bool,
        production_fn: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("dominance violated at price {price}, pass_through {pass_through}: {what} GL {gl} < Linear {linear}")]
    DominanceViolation {
        price: f64,
        pass_through: bool,
        what: &'static str,
        gl: f64,
        linear: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &str, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }
}
