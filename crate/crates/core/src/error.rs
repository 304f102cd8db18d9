use thiserror::Error;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("optimal transport solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported in the dynamic regime: {0}")]
    UnsupportedRegime(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnsupportedRegime(_) => 2,
            Error::Data(_) | Error::Io { .. } | Error::Serde(_) | Error::InvalidInput(_) => 3,
            Error::Shape(_) => 3,
            Error::NonFinite { .. }
            | Error::Numeric(_)
            | Error::DegenerateGeometry(_)
            | Error::SolverDivergence { .. } => 4,
            Error::Context { source, .. } => source.exit_code(),
        }
    }

    /// Short machine-readable tag, written into `error.json`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::Numeric(_) => "numeric",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::SolverDivergence { .. } => "solver_divergence",
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::UnsupportedRegime(_) => "unsupported_regime",
            Error::Data(_) => "data",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
            Error::Context { source, .. } => source.kind(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
