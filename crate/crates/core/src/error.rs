use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller passed arguments outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: missing column `{column}` in {path}")]
    Schema { column: String, path: String },

    #[error("transport error after {retries} retries: {message}")]
    Transport { retries: u32, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("alignment error: {} uid(s) missing: {}", missing.len(), preview(missing))]
    Alignment { missing: Vec<String> },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("unsupported corpus: {0}")]
    UnsupportedCorpus(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: u64, loss: f64 },

    #[error("instance {uid}: {source}")]
    Instance {
        uid: String,
        #[source]
        source: Box<Error>,
    },

    #[error("repeat {repeat}: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn preview(uids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = uids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if uids.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn for_instance(self, uid: impl Into<String>) -> Self {
        Error::Instance {
            uid: uid.into(),
            source: Box::new(self),
        }
    }
}
