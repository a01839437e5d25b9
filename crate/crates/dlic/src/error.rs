use std::path::PathBuf;

/// Errors from file formats, ingestion and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum DlicError {
    #[error(transparent)]
    Core(#[from] dlic_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("checksum mismatch in {0}")]
    Checksum(&'static str),
    #[error("unsupported {kind} version {found}")]
    Version { kind: &'static str, found: u32 },
    #[error("ingest error: {0}")]
    Ingest(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("determinism violation: {0}")]
    Determinism(String),
}

pub type Result<T> = std::result::Result<T, DlicError>;

impl DlicError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 format or corruption, 3 determinism.
    pub fn exit_code(&self) -> i32 {
        match self {
            DlicError::Usage(_) => 1,
            DlicError::Determinism(_) => 3,
            _ => 2,
        }
    }
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| DlicError::io(path, e))
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| DlicError::io(path, e))
}
