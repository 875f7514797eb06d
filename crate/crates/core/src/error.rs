use thiserror::Error;

/// Errors produced by the signal, loss and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("signal is constant; normalization denominator is zero")]
    ConstantSignal,
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("bad window: window_len={window_len}, stride={stride}, len={len}")]
    BadWindow {
        window_len: usize,
        stride: usize,
        len: usize,
    },
    #[error("bad band ({lo}, {hi}) Hz for fs={fs} Hz")]
    BadBand { lo: f64, hi: f64, fs: f64 },
    #[error("length {len} is not divisible by 2^{levels}")]
    BadLength { len: usize, levels: usize },
    #[error("malformed wavelet decomposition: {0}")]
    Malformed(String),
    #[error("no spectral peak: in-band spectrum is identically zero")]
    NoPeak,
    #[error("in-band spectral mass is zero")]
    ZeroSpectrum,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("mass normalization denominator is zero")]
    ZeroMass,
    #[error("empty sequence")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sampling rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("no beats detected")]
    NoBeats,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("constant input; correlation undefined")]
    ConstantInput,
    #[error("zero-norm vector in attention input")]
    ZeroVector,
    #[error("optimization diverged: total loss {0}")]
    Diverged(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
