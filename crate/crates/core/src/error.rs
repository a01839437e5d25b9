use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate calibration range [{min}, {max}]")]
    DegenerateRange { min: f32, max: f32 },
    #[error("invalid requantization scale {0}")]
    InvalidScale(f32),
    #[error("degenerate requantization: scale {m} cannot carry information at {bits} bits")]
    DegenerateRequant { m: f32, bits: u32 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("index out of bounds: {0}")]
    Index(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("accumulator bound exceeded: {0}")]
    Accumulator(String),
    #[error("zero-width coding interval [{low}, {high})")]
    ZeroWidthInterval { low: u32, high: u32 },
    #[error("stream underrun")]
    Underrun,
    #[error("stream corrupted: {0}")]
    Corrupt(String),
}

pub type Result<T> = core::result::Result<T, Error>;
