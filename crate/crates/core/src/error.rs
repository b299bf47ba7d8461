use thiserror::Error;

pub type Result<T, E = RppgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RppgError {
    #[error("malformed landmark record at frame {frame}: {message}")]
    Parse { frame: String, message: String },

    #[error("landmark schema violation at frame {frame}: {message}")]
    Schema { frame: u64, message: String },

    #[error("no face detected in frame {frame}")]
    NoFace { frame: u64 },

    #[error("{region} ROI {rect:?} exits the {width}x{height} frame")]
    RoiOutOfBounds {
        region: String,
        rect: (i64, i64, u32, u32),
        width: u32,
        height: u32,
    },

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient peaks: need at least 2, found {found}")]
    InsufficientPeaks { found: usize },

    #[error("signals are not aligned: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated frame stream: expected {expected} payload bytes, found {found}")]
    TruncatedStream { expected: u64, found: u64 },

    #[error("subject join failed: {0}")]
    Join(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RppgError {
    /// True for failures caused by too little usable signal rather than bad input.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(self, RppgError::InsufficientData(_) | RppgError::InsufficientPeaks { .. })
    }
}
