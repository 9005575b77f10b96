use std::path::PathBuf;

/// Failures of the runner, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("size cap: {0}")]
    SizeCap(String),

    #[error("numerical failure in instance {instance}: {source}")]
    Numerical {
        instance: usize,
        source: ctqo_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Data(String),

    #[error("verification failed: {} mismatch(es)", .0.len())]
    Verify(Vec<String>),

    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::SizeCap(_) => 3,
            CliError::Numerical { .. } => 4,
            CliError::Io { .. } => 5,
            CliError::Verify(_) | CliError::Data(_) => 6,
            CliError::Internal(_) => 70,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::SizeCap(_) => "size_cap",
            CliError::Numerical { .. } => "numerical",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Verify(_) => "verify",
            CliError::Internal(_) => "internal",
        }
    }

    /// Classifies a core error raised while computing `instance`.
    pub fn from_core(instance: usize, e: ctqo_core::Error) -> Self {
        match e {
            ctqo_core::Error::SizeCap { .. } => CliError::SizeCap(e.to_string()),
            ctqo_core::Error::InvalidArgument(msg) => {
                CliError::Config(format!("instance {instance}: {msg}"))
            }
            source => CliError::Numerical { instance, source },
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Machine-readable report printed on failure.
    pub fn report(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Verify(list) = self {
            v["mismatches"] = serde_json::json!(list);
        }
        v
    }
}
