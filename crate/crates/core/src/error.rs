use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("weights container: {0}")]
    WeightsFormat(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}`: dimension mismatch, expected {expected:?}, got {got:?}")]
    DimMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor `{0}`: non-finite value")]
    NonFinite(String),
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("token index {0} out of vocabulary range (size {1})")]
    IndexOutOfRange(u32, usize),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("arpa model: {0}")]
    Arpa(String),
    #[error("config: {0}")]
    Config(String),
    #[error("search: {0}")]
    Search(String),
    #[error("audit: {0}")]
    Audit(String),
    #[error("mert: {0}")]
    Mert(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
