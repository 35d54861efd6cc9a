//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by callers that need to map failures to
/// process exit codes (validation = 1, I/O = 2, network = 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Network,
}

#[derive(Debug, Error)]
pub enum Error {
    // ---- parameter / precondition violations ----
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{context}: dimensions differ ({a_width}x{a_height} vs {b_width}x{b_height})")]
    DimensionMismatch {
        context: &'static str,
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },

    #[error("kernel {kernel_width}x{kernel_height} exceeds raster {width}x{height}")]
    KernelTooLarge {
        kernel_width: u32,
        kernel_height: u32,
        width: u32,
        height: u32,
    },

    #[error("coefficient window {window} does not fit raster extent {extent} along {axis}")]
    WindowTooLarge {
        window: usize,
        extent: u32,
        axis: &'static str,
    },

    #[error("raster {width}x{height} too small for {context}")]
    RasterTooSmall {
        context: &'static str,
        width: u32,
        height: u32,
    },

    #[error("latitude {0} outside Web Mercator range (|lat| <= 85.05113)")]
    LatitudeOutOfRange(f64),

    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),

    #[error("point ({x}, {y}) outside extent {width}x{height}")]
    OutOfExtent {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("tile ({z}/{x}/{y}) missing from input set")]
    TileNotProvided { z: u8, x: u32, y: u32 },

    #[error("tile ({z}/{x}/{y}) is {width}x{height}, expected {expected}x{expected}")]
    BadTileSize {
        z: u8,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        expected: u32,
    },

    // ---- image I/O ----
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("malformed image {path}: {reason}")]
    MalformedImage { path: PathBuf, reason: String },

    #[error("unsupported sample depth in {path}: {detail}")]
    UnsupportedDepth { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // ---- tile fetching ----
    #[error("tile {z}/{x}/{y} not found (HTTP 404)")]
    TileMissing { z: u8, x: u32, y: u32 },

    #[error("HTTP status {status} for tile {z}/{x}/{y}")]
    HttpStatus { status: u16, z: u8, x: u32, y: u32 },

    #[error("network failure for tile {z}/{x}/{y} after {attempts} attempts: {detail}")]
    Network {
        z: u8,
        x: u32,
        y: u32,
        attempts: u32,
        detail: String,
    },

    #[error("payload for tile {z}/{x}/{y} is not a decodable image: {detail}")]
    BadPayload {
        z: u8,
        x: u32,
        y: u32,
        detail: String,
    },

    #[error("region fetch failed for {} tile(s): {}", failures.len(), describe_failures(failures))]
    RegionFetch { failures: Vec<(u8, u32, u32)> },

    // ---- pipeline ----
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),
}

fn describe_failures(failures: &[(u8, u32, u32)]) -> String {
    failures
        .iter()
        .map(|(z, x, y)| format!("{z}/{x}/{y}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::FileNotFound(_) | Error::MalformedImage { .. } => {
                ErrorClass::Io
            }
            Error::UnsupportedDepth { .. } => ErrorClass::Io,
            Error::TileMissing { .. }
            | Error::HttpStatus { .. }
            | Error::Network { .. }
            | Error::BadPayload { .. } => ErrorClass::Network,
            Error::RegionFetch { .. } => ErrorClass::Network,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
