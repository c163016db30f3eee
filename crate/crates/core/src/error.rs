use thiserror::Error;

/// Errors produced while building, validating, simulating or optimizing a workload.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The configuration text is not a well-formed document.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    /// A key that is not part of the configuration format.
    #[error("unknown key `{key}` in {section}")]
    UnknownKey { section: String, key: String },

    /// A value violates one of the documented invariants. `field` names the
    /// violated quantity (e.g. `activation_density`).
    #[error("invalid {field}: {message}")]
    Semantic { field: String, message: String },

    /// The network cannot be placed on the chip.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A split was requested but every core of the chip is already allocated.
    #[error("no free cores: all {0} cores are in use")]
    NoFreeCores(usize),

    /// The layer already has one partition per neuron.
    #[error("layer {layer} cannot be split further ({neurons} neurons, {partitions} partitions)")]
    CannotSplit {
        layer: usize,
        neurons: usize,
        partitions: usize,
    },

    /// Plan, mapping and network disagree with each other.
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    /// Not enough data to fit a floorline.
    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    /// A point lies below both floorline bounds by more than the tolerance.
    #[error(
        "point at intensity {intensity} with time {time} lies below the floorline bound {bound} beyond tolerance"
    )]
    ModelViolation {
        intensity: f64,
        time: f64,
        bound: f64,
    },

    /// The optimizer has no legal move under the current assumption.
    #[error("no legal action: {0}")]
    NoLegalAction(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
