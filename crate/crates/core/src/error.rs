use std::path::PathBuf;

/// Errors raised by the toolkit.
///
/// Variants split into two families: I/O failures (file system and
/// serialization of outputs) and contract violations (malformed inputs,
/// invalid parameters, inconsistent tables). The CLI maps the first family to
/// exit code 2 and the second to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("sample `{id}` has label {label} outside [0, {num_classes})")]
    LabelOutOfRange {
        id: String,
        label: usize,
        num_classes: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown sample id `{0}`")]
    UnknownId(String),

    #[error("no label for sample `{0}`")]
    MissingLabel(String),

    #[error("sample `{id}` is missing epoch {epoch}")]
    MissingEpoch { id: String, epoch: usize },

    #[error("sample `{id}` has epoch {epoch} more than once")]
    DuplicateEpoch { id: String, epoch: usize },

    #[error("sample `{id}` epoch {epoch}: logit vector has length {found}, expected {expected}")]
    LogitLength {
        id: String,
        epoch: usize,
        expected: usize,
        found: usize,
    },

    #[error("sample `{id}` epoch {epoch}: non-finite logit")]
    NonFiniteLogit { id: String, epoch: usize },

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {class} has {available} eligible samples, fake-class quota needs {needed}")]
    InsufficientClass {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("sample `{0}` is in the fake class of both threshold runs")]
    OverlappingFakeSets(String),

    #[error("no cluster metadata for sample `{0}`")]
    UnknownCluster(String),

    #[error("id mismatch: `{0}` is missing from one of the joined tables")]
    IdMismatch(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// True for file-system level failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Serialize(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
