use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input geometry has no well-defined answer (collinear bearings, coincident points).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// No pair of lines of sight intersects in front of both cameras.
    #[error("no forward intersection between lines of sight")]
    NoIntersection,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("scenario generation failed: {0}")]
    Generation(String),

    /// Malformed input file. `line` and `column` are 1-based when known;
    /// binary formats report a byte offset in `column` and leave `line` at 0.
    #[error("parse error in {source_name} at {line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn from_json(source_name: &str, err: serde_json::Error) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
