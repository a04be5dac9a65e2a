use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: file not found")]
    FileNotFound { path: PathBuf },

    #[error("{path}: unsupported encoding ({detail})")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("{path}: data chunk is truncated")]
    TruncatedData { path: PathBuf },

    #[error("{path}: malformed wav file: {detail}")]
    MalformedWav { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {clipped} of {total} samples clipped, above the allowed fraction {max_fraction}")]
    ExcessiveClipping {
        path: PathBuf,
        clipped: usize,
        total: usize,
        max_fraction: f64,
    },

    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),

    #[error("invalid sample rate: {0} Hz")]
    InvalidSampleRate(u32),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("length mismatch: {left} vs {right} frames")]
    LengthMismatch { left: usize, right: usize },

    #[error("expected {expected} channel(s), got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("invalid stft configuration: {0}")]
    InvalidStft(String),

    #[error("window does not satisfy constant overlap-add: {0}")]
    NotCola(String),

    #[error("reverberation time must be positive, got {0} s")]
    InvalidT60(f64),

    #[error("invalid room: {0}")]
    InvalidRoom(String),

    #[error("source placement failed after {0} attempts")]
    PlacementFailed(usize),

    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),

    #[error("signal has zero energy: {0}")]
    ZeroEnergy(&'static str),

    #[error("insufficient utterances: {0}")]
    InsufficientUtterances(String),

    #[error("count mismatch: {estimates} estimates vs {references} references")]
    CountMismatch { estimates: usize, references: usize },

    #[error("exhaustive permutation search supports at most {max} sources, got {got}")]
    TooManySources { got: usize, max: usize },

    #[error("missing component: {0}")]
    MissingComponent(String),

    #[error("stage `{stage}` produced {got} output(s), expected {expected}")]
    Arity { stage: String, expected: usize, got: usize },

    #[error("invalid cascade: {0}")]
    InvalidChain(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
