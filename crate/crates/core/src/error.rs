use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the dimlab core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: truncated scanline at row {row}")]
    TruncatedScanline { path: PathBuf, row: usize },

    #[error("{path}: unsupported orientation `{orientation}`")]
    UnsupportedOrientation { path: PathBuf, orientation: String },

    #[error("{path}: pixel payload does not match header dimensions ({expected} values expected, {actual} present)")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("dimension mismatch: {context} ({left_w}x{left_h} vs {right_w}x{right_h})")]
    DimensionMismatch {
        context: &'static str,
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("inverse transform produced imaginary residue {residue:e} (relative), layout bug upstream")]
    ImaginaryResidue { residue: f64 },

    #[error("backlight has {values} values but layout defines {leds} LEDs")]
    BacklightMismatch { values: usize, leds: usize },

    #[error("optimization diverged: non-finite loss at iteration {iter}")]
    NonFiniteLoss { iter: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
