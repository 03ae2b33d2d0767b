use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("no steady state after {steps} steps (last residual {residual:e})")]
    NonConvergence { steps: usize, residual: f64 },

    #[error("markov chain stuck: {rejections} consecutive rejections")]
    StuckChain { rejections: usize },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: &'static str },

    #[error("at iteration {iteration}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
