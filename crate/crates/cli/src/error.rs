use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] pielm::PielmError),
    #[error("unknown table `{0}` (expected T1 to T5)")]
    UnknownTable(String),
    #[error("unknown scale `{0}` (expected full or desk)")]
    UnknownScale(String),
    #[error("non-finite result: {0}")]
    NonFinite(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
