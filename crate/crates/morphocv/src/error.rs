use std::path::PathBuf;

use axum::http::StatusCode;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] morphocv_core::Error),
    #[error("no instances found")]
    NoInstances,
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("upload exceeds the {limit_mb} MiB limit")]
    UploadTooLarge { limit_mb: u64 },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not found")]
    NotFound,
}

impl AppError {
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::NoInstances => "E_NO_INSTANCES",
            AppError::MissingInput(_) => "E_MISSING_INPUT",
            AppError::UploadTooLarge { .. } => "E_UPLOAD_TOO_LARGE",
            AppError::BadRequest(_) => "E_BAD_REQUEST",
            AppError::PortInUse(_) => "E_PORT_IN_USE",
            AppError::Config(_) => "E_CONFIG",
            AppError::Io { .. } => "E_IO",
            AppError::NotFound => "E_NOT_FOUND",
        }
    }

    /// HTTP status for service responses. Input problems are client errors.
    pub fn status(&self) -> StatusCode {
        match self {
            AppError::UploadTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            AppError::NotFound => StatusCode::NOT_FOUND,
            AppError::PortInUse(_) | AppError::Config(_) | AppError::Io { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }
}
