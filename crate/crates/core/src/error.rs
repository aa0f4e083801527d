use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("malformed PLY body: {0}")]
    MalformedBody(String),
    #[error("PLY vertex element has no {0} property")]
    MissingColor(&'static str),
    #[error("PLY vertex element has no {0} coordinate")]
    MissingCoordinate(&'static str),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("bounding sphere has zero radius (all points coincide)")]
    ZeroRadius,
    #[error("invalid view parameters: {0}")]
    InvalidView(String),
    #[error("raster dimensions mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("expected {expected} landmarks, got {actual}")]
    WrongLandmarkCount { expected: usize, actual: usize },
    #[error("landmark {index} at ({x}, {y}) lies outside the {width}x{height} raster")]
    OutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("landmark parse error on line {line}: {message}")]
    LandmarkParse { line: usize, message: String },
    #[error("all points are collinear; no triangulation exists")]
    Collinear,
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("triangle meshes do not share the same index list")]
    MeshMismatch,
    #[error("morph has no jointly valid pixel")]
    EmptyMorph,
    #[error("inpainting mask covers the entire image")]
    MaskCoversImage,
    #[error("image of {width}x{height} is smaller than the {patch}px descriptor patch")]
    ImageTooSmall {
        width: usize,
        height: usize,
        patch: usize,
    },
    #[error("need at least 4 correspondences, got {0}")]
    TooFewMatches(usize),
    #[error("homography estimation failed: {0}")]
    DegenerateHomography(String),
    #[error("clipping removed every point")]
    EmptyClip,
    #[error("need at least {needed} points for k-nearest neighbours, got {actual}")]
    TooFewPoints { needed: usize, actual: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("score matrix: {0}")]
    InvalidScores(String),
    #[error("morph {0} has unequal attempt counts for its two subjects")]
    UnpairedAttempts(String),
    #[error("training set must contain both classes with at least two samples each")]
    SingleClass,
    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    FeatureDimension { expected: usize, actual: usize },
    #[error("subjects {0:?} appear in both train and test sets")]
    LeakedSplit(Vec<String>),
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's files or parameters rather than by a
    /// numerical failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedHeader(_)
                | Error::MalformedBody(_)
                | Error::MissingColor(_)
                | Error::MissingCoordinate(_)
                | Error::EmptyCloud
                | Error::InvalidCloud(_)
                | Error::InvalidView(_)
                | Error::DimensionMismatch { .. }
                | Error::WrongLandmarkCount { .. }
                | Error::OutOfBounds { .. }
                | Error::LandmarkParse { .. }
                | Error::EmptyInput(_)
                | Error::InvalidParameter(_)
                | Error::InvalidScores(_)
                | Error::UnpairedAttempts(_)
                | Error::SingleClass
                | Error::FeatureDimension { .. }
                | Error::LeakedSplit(_)
                | Error::Parse { .. }
                | Error::Image(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
