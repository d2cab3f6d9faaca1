use thiserror::Error;

use crate::rate_control::FrameDecision;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed Y4M header: {0}")]
    Y4mHeader(String),

    #[error("unsupported chroma format `{0}` (only 4:2:0 and 4:0:0 are supported)")]
    UnsupportedChroma(String),

    #[error("truncated payload in frame {index}")]
    TruncatedFrame { index: usize },

    #[error("file length {len} bytes is not a multiple of the expected frame size of {frame_bytes} bytes")]
    RawSizeMismatch { len: u64, frame_bytes: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no frames")]
    NoFrames,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("QP {0} outside [0, 63]")]
    QpOutOfRange(i64),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Model(#[from] ModelFileError),

    #[error("invalid RD curve: {0}")]
    InvalidCurve(String),

    #[error("no PSNR overlap between the RD curves")]
    NoPsnrOverlap,

    #[error("encoder failed on frame {frame_index}: {message}")]
    Encoder {
        frame_index: usize,
        message: String,
        /// Decisions completed before the failure.
        partial_trace: Vec<FrameDecision>,
    },
}

/// Failures while decoding a serialized forest.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("not a forest model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file checksum mismatch")]
    Checksum,
    #[error("model file truncated")]
    Truncated,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}
