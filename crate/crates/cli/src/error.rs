use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Schema violation, with the dotted path to the offending key.
    #[error("config invalid at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("bad override `{arg}`: {message}")]
    Override { arg: String, message: String },

    #[error("scenario rejected:\n{0}")]
    Rejected(String),

    #[error("{context}: {source}")]
    Task {
        context: String,
        #[source]
        source: abflux_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for abflux_core::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Task {
            context: what.to_string(),
            source,
        })
    }
}
