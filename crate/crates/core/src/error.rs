use thiserror::Error;

/// Errors raised while building or evaluating mechanisms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function being evaluated.
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    /// The cost density vanished where the virtual cost needs to divide by it.
    #[error("cost density is zero at c = {at}")]
    DegenerateDensity { at: f64 },

    /// A root finder or quadrature routine failed to reach its tolerance.
    #[error("numerical failure in {routine}: {detail}")]
    Numerical {
        routine: &'static str,
        detail: String,
    },

    /// The requested aggregate rate exceeds the total capacity of the sources.
    #[error("aggregate rate {requested} exceeds total capacity {capacity}")]
    Infeasible { requested: f64, capacity: f64 },

    /// Invalid model parameters or configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A precomputation would exceed the allowed size.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            routine,
            detail: detail.into(),
        }
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::Resource(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
