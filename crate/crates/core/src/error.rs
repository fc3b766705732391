use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid risk parameter {beta} for {metric}")]
    InvalidRiskParameter { metric: &'static str, beta: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{name} = {value} is out of range ({range})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("non-finite {which} loss at iteration {iteration}, epoch {epoch}, minibatch {minibatch}")]
    NonFiniteLoss {
        which: &'static str,
        iteration: u64,
        epoch: usize,
        minibatch: usize,
    },

    #[error("reward term `{0}` not found")]
    MissingTerm(String),

    #[error("trajectory is incomplete")]
    IncompleteTrajectory,

    #[error("oracle requires a deterministic policy")]
    StochasticPolicy,

    #[error("environment lane {lane}: {message}")]
    Env { lane: usize, message: String },

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
