use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("depth file is empty")]
    EmptyFile,
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("cell at row {row}, column {col} is not a finite number: {token:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        token: String,
    },
    #[error("negative depth {value} at row {row}, column {col}")]
    NegativeDepth { row: usize, col: usize, value: f64 },
    #[error("unsupported PNG format: {0}")]
    UnsupportedPngFormat(String),
    #[error("PNG decode failed: {0}")]
    Decode(String),
    #[error("invalid sidecar: {0}")]
    Sidecar(String),
    #[error("feature records mix 2D-only and 3D schemas")]
    MixedSchemas,
    #[error("mask is empty")]
    EmptyMask,
    #[error("dimension mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("no nonzero depth values inside the region of interest")]
    EmptyRoi,
    #[error("gaussian sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("point set is empty")]
    EmptyInput,
    #[error("sidecar references instance id {0} which is absent from the label mask")]
    UnknownSidecarId(u32),
    #[error("no ground-truth instances")]
    NoGroundTruth,
    #[error("both masks are empty")]
    BothEmpty,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable machine-readable code, shared by the CLI and the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyFile => "E_EMPTY_FILE",
            Error::RaggedRows { .. } => "E_RAGGED_ROWS",
            Error::NonNumericCell { .. } => "E_NON_NUMERIC_CELL",
            Error::NegativeDepth { .. } => "E_NEGATIVE_DEPTH",
            Error::UnsupportedPngFormat(_) => "E_UNSUPPORTED_PNG_FORMAT",
            Error::Decode(_) => "E_DECODE",
            Error::Sidecar(_) => "E_SIDECAR",
            Error::MixedSchemas => "E_MIXED_SCHEMAS",
            Error::EmptyMask => "E_EMPTY_MASK",
            Error::DimensionMismatch { .. } => "E_DIMENSION_MISMATCH",
            Error::EmptyRoi => "E_EMPTY_ROI",
            Error::NegativeSigma(_) => "E_NEGATIVE_SIGMA",
            Error::EmptyInput => "E_EMPTY_INPUT",
            Error::UnknownSidecarId(_) => "E_UNKNOWN_SIDECAR_ID",
            Error::NoGroundTruth => "E_NO_GROUND_TRUTH",
            Error::BothEmpty => "E_BOTH_EMPTY",
            Error::InvalidGrid(_) => "E_INVALID_GRID",
            Error::InvalidParameter(_) => "E_INVALID_PARAMETER",
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }
}
