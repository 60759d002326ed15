use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav error on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),
    #[error("audio has no samples")]
    EmptyAudio,
    #[error("signal contains non-finite samples")]
    NonFiniteSignal,
    #[error("signal is all zeros")]
    AllZeroSignal,
    #[error("signal has zero energy: {0}")]
    ZeroEnergy(String),
    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("window overlap-add denominator vanishes: {0}")]
    NolaViolation(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,
    #[error("filterbank error: {0}")]
    Filterbank(String),
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("reports disagree on {0}; histogram requires a homogeneous set")]
    MixedReports(String),
    #[error("manifest error in {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("gave up after {attempts} failed clip draws: {last}")]
    ClipRetriesExhausted { attempts: usize, last: String },
    #[error("tensor file error in {path}: {msg}")]
    TensorFile { path: PathBuf, msg: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
