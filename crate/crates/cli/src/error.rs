use std::path::PathBuf;

use mldmae_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 usage, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Schema { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::Config(_) => 2,
                CoreError::PriorCollapse { .. } | CoreError::NonFinite { .. } | CoreError::Infeasible => 4,
                _ => 3,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::io("a", std::io::ErrorKind::NotFound.into()).exit_code(), 3);
        assert_eq!(CliError::Core(CoreError::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::Empty("x")).exit_code(), 3);
        let collapse = CoreError::PriorCollapse {
            cluster: 0,
            accepted: 0,
            proposals: 1,
        };
        assert_eq!(CliError::Core(collapse).exit_code(), 4);
        assert_eq!(CliError::Core(CoreError::Infeasible).exit_code(), 4);
    }
}
