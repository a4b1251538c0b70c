use thiserror::Error;

/// Errors raised by the geometry, flow and reporting layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape is not strictly convex at node {node} (value {value:e})")]
    Construction { node: usize, value: f64 },
    #[error("convexity lost at node {node}: curvature {value:e}")]
    ConvexityLoss { node: usize, value: f64 },
    #[error("hemisphere violated at node {node}: u = {value}")]
    Hemisphere { node: usize, value: f64 },
    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },
    #[error("{flow} flow failed at t = {t}: {source}")]
    Flow {
        flow: &'static str,
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
