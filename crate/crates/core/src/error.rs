use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
    #[error("video has no frames")]
    EmptyVideo,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),

    #[error("frame of {height}x{width} is too small for a 2-D DCT")]
    DegenerateFrame { height: usize, width: usize },

    #[error("frame hash series is empty")]
    EmptySeries,
    #[error("match table is empty")]
    EmptyMatchTable,
    #[error("invalid match table: {0}")]
    InvalidMatchTable(String),
    #[error("no warping path fits inside a band of radius {0}")]
    InfeasibleBand(usize),

    #[error("video too short: need at least {needed} frames, got {got}")]
    VideoTooShort { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("optical flow is zero everywhere; the flow hash cannot be normalized")]
    AllZeroFlow,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("triplet set is empty")]
    EmptyTripletSet,

    #[error("invalid attack parameters: {0}")]
    InvalidAttack(String),
    #[error("only {survivors} frames would survive the drop; at least 2 are required")]
    TooShortAfterDrop { survivors: usize },

    #[error("scored pairs lack the {0} class")]
    MissingLabelClass(&'static str),
    #[error("corpus needs at least 2 videos, got {0}")]
    CorpusTooSmall(usize),

    #[error("record not found: {0}")]
    NotFound(String),
    #[error("configuration fingerprint mismatch between {0} and {1}")]
    FingerprintMismatch(String, String),
    #[error("corrupt store: {0}")]
    CorruptStore(String),
}

impl Error {
    /// Process exit code for the command line tool: 3 for bad data, 4 for
    /// failures inside the numeric pipeline. Usage errors (2) are raised by
    /// the argument parser before any of these can occur.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidAttack(_) => 2,
            Error::UnsupportedFormat(_)
            | Error::CorruptStream(_)
            | Error::EmptyVideo
            | Error::Io(_)
            | Error::NotFound(_)
            | Error::FingerprintMismatch(..)
            | Error::CorruptStore(_)
            | Error::CorpusTooSmall(_)
            | Error::LengthMismatch(..)
            | Error::MissingLabelClass(_) => 3,
            _ => 4,
        }
    }
}
