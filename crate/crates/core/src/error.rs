use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("solver did not reach residual {target:.3e} within {iterations} iterations (final residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("capacitance matrix is numerically singular (pivot {pivot:.3e}); check the spectral condition")]
    Conditioning { pivot: f64 },

    #[error("dense path limited to n <= {cap}, got n = {n}")]
    DenseCap { n: usize, cap: usize },

    #[error("infeasible bounds in row {row}: {message}")]
    Infeasible { row: usize, message: String },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for solver and conditioning failures, false for bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Convergence { .. } | Error::Conditioning { .. } => true,
            Error::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
