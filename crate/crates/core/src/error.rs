use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{requested} vehicles exceed lane capacity of {capacity}")]
    LaneCapacity { requested: usize, capacity: usize },

    #[error("need at least {required} vehicles, got {got}")]
    TooFewVehicles { required: usize, got: usize },

    #[error("link {0} is not active")]
    InactiveLink(usize),

    #[error("transmitter {0} has no assigned sub-band")]
    Unallocated(usize),

    #[error("action {action} outside action space of size {size}")]
    ActionOutOfRange { action: usize, size: usize },

    #[error("vehicle {vehicle} does not hold message {message}")]
    NotHeld { vehicle: usize, message: usize },

    #[error("input dimension {got} does not match network input {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at update {update}: loss = {loss}")]
    Diverged { update: u64, loss: f64 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
