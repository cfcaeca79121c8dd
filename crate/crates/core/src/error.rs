use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate neuron {index}: zero first-layer weight vector")]
    DegenerateNeuron { index: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Numeric(_) | Error::NonFinite { .. } => "numeric",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Unsupported(_) => "unsupported",
            Error::DegenerateNeuron { .. } => "degenerate-neuron",
            Error::Resolution(_) => "resolution",
            Error::Diverged { .. } => "training",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
