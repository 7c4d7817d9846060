use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("shape mismatch: expected {expected} elements, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value {value} at element {index}")]
    NonFinite { index: usize, value: f32 },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error(
        "bad magic {:?} at byte offset {offset}, expected {:?}",
        String::from_utf8_lossy(found),
        String::from_utf8_lossy(expected)
    )]
    BadMagic {
        expected: [u8; 4],
        found: [u8; 4],
        offset: u64,
    },

    #[error("unsupported format version {found} at byte offset {offset}")]
    UnsupportedVersion { found: u16, offset: u64 },

    #[error("unsupported header flags {flags:#06x} at byte offset {offset}")]
    UnsupportedFlags { flags: u16, offset: u64 },

    #[error("truncated file: expected {expected} bytes, found {actual} (at byte offset {offset})")]
    Truncated {
        expected: u64,
        actual: u64,
        offset: u64,
    },

    #[error("payload size mismatch: header implies {expected} bytes, file has {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("non-finite payload value {value} at byte offset {offset}")]
    NonFinitePayload { offset: u64, value: f32 },

    #[error("code {code} out of range for a {bits}-bit codebook at element {index}")]
    InvalidCode { code: u8, bits: u8, index: usize },

    #[error("codebook mismatch: block was coded with {block}, got {given}")]
    CodebookMismatch { block: u16, given: u16 },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("too few samples for {bits}-bit training: need {required}, got {actual}")]
    TooFewSamples {
        bits: u8,
        required: usize,
        actual: usize,
    },

    #[error("layer {layer} out of range (pool has {num_layers} layers)")]
    LayerOutOfRange { layer: usize, num_layers: usize },

    #[error("unsupported decode precision {0} bits (expected 16 or 32)")]
    UnsupportedPrecision(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by malformed input files rather than I/O or misuse.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::UnsupportedVersion { .. }
                | Error::UnsupportedFlags { .. }
                | Error::Truncated { .. }
                | Error::SizeMismatch { .. }
                | Error::NonFinitePayload { .. }
                | Error::InvalidGeometry(_)
        )
    }
}
