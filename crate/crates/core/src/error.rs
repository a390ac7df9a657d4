use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible alignment: label of length {label_len} needs at least {required} frames, lattice has {frames}")]
    InfeasibleAlignment {
        label_len: usize,
        required: usize,
        frames: usize,
    },

    #[error("no glyph for character {0:?}")]
    MissingGlyph(char),

    #[error("sample {sample}: {message}")]
    Data { sample: String, message: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported file version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("vocabulary mismatch: checkpoint has {stored:?}, caller expects {requested:?}")]
    VocabularyMismatch { stored: String, requested: String },

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },

    #[error("image {path}: {message}")]
    Image { path: String, message: String },

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.display().to_string(),
        source,
    }
}
