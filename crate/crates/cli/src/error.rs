use std::fmt::Display;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or input files; nothing has been written.
    #[error("{0}")]
    Invalid(String),

    /// Everything else succeeded, but some decodes could not meet their constraints.
    #[error("{0} decode(s) could not satisfy their constraints")]
    Unsatisfiable(usize),

    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Unsatisfiable(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<stylecap::Error> for CliError {
    fn from(e: stylecap::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn invalid(msg: impl Display) -> CliError {
    CliError::Invalid(msg.to_string())
}
