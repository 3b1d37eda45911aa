use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] npr_core::Error),

    #[error("invalid configuration at {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot parse initial condition {expr:?}: {reason}")]
    IcExpr { expr: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use npr_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::IcExpr { .. } | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::Diverged { .. } | E::NonFinite { .. } => EXIT_DIVERGED,
                E::Io(_) | E::Format { .. } => EXIT_IO,
                E::Config(_) | E::Length { .. } | E::Domain(_) | E::Shock(_) | E::Grid(_) => EXIT_CONFIG,
            },
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
