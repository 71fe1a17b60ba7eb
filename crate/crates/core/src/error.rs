use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hierarchical modulation parameter {0} outside [0, 0.5]")]
    InvalidAlpha(f64),

    #[error("layer bits must fit in two bits (hp={hp}, lp={lp})")]
    InvalidBits { hp: u8, lp: u8 },

    #[error("channel gain is zero; detection is undefined")]
    ZeroChannel,

    #[error("composite constellation needs 1 to 3 transmitters, got {0}")]
    TransmitterCount(usize),

    #[error("SNR grid is empty")]
    EmptyGrid,

    #[error("target BLER {target} outside the achievable range [{min}, {max}]")]
    TargetOutOfRange { target: f64, min: f64, max: f64 },

    #[error("distance {distance} m below model validity ({min} m)")]
    DistanceOutOfRange { distance: f64, min: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("link-curve cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("link-curve cache {path} failed checksum verification")]
    ChecksumMismatch { path: PathBuf },

    #[error("link-curve cache {path} not found; run `lhs linkchar` first")]
    MissingCache { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
