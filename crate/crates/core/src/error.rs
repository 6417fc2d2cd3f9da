use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid microring state: {0}")]
    InvalidState(String),
    #[error("wavelength must be positive, got {0} nm")]
    InvalidWavelength(f64),
    #[error("level {level} out of range for {bits}-bit weights")]
    LevelOutOfRange { level: u32, bits: u8 },
    #[error("weight code {code} out of range for {bits}-bit converter")]
    CodeOutOfRange { code: u32, bits: u8 },
    #[error("negative voltage {0} V")]
    NegativeVoltage(f64),
    #[error("voltage {value} V exceeds supply {supply} V")]
    VoltageAboveSupply { value: f64, supply: f64 },
    #[error("negative optical intensity {0}")]
    NegativeIntensity(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: {activations} activations vs {weights} weights")]
    LengthMismatch { activations: usize, weights: usize },
    #[error("{len} elements exceed the {capacity} usable slots of an arm")]
    LengthOverflow { len: usize, capacity: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("unsupported kernel size {0}; expected 3, 5 or 7")]
    UnsupportedKernelSize(usize),
    #[error("layer produces no output positions: {0}")]
    ZeroOutputGeometry(String),
    #[error("weight {weight} does not fit in {bits} magnitude bits")]
    BitWidthOverflow { weight: i32, bits: u8 },
    #[error("unsupported layer kind `{0}`")]
    UnsupportedLayer(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing constant `{0}`")]
    MissingConstant(String),
    #[error("total latency is zero")]
    ZeroLatency,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fixture {path}: {reason}")]
    Fixture { path: PathBuf, reason: String },
    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn fixture(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        SimError::Fixture {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error comes from reading or validating an on-disk fixture.
    pub fn is_fixture_error(&self) -> bool {
        matches!(
            self,
            SimError::Fixture { .. } | SimError::ChecksumMismatch { .. } | SimError::Io { .. }
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
