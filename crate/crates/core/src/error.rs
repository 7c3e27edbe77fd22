use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the fusion core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("degenerate distribution: entries must be >= 0 with a positive sum")]
    DegenerateDistribution,

    #[error("probability out of range or not normalized: {value}")]
    BadProbability { value: f64 },

    #[error("input distribution is not normalized (sum = {sum})")]
    UnnormalizedInput { sum: f64 },

    #[error("raster geometries do not match")]
    GeometryMismatch,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("window of {window} pixels does not fit a {width}x{height} image")]
    WindowTooLarge {
        window: usize,
        width: usize,
        height: usize,
    },

    #[error("series has fewer than 2 present epochs")]
    InsufficientData,

    #[error("need at least {needed} pixels, got {got}")]
    TooFewPixels { needed: usize, got: usize },

    #[error("pixel cloud is degenerate: every candidate simplex has zero volume")]
    DegenerateCloud,

    #[error("endmember matrix is rank deficient")]
    RankDeficient,

    #[error("no fine pixel falls inside the coarse grid")]
    EmptyOverlap,

    #[error("{classes} classes exceeds the enumeration limit of {limit}")]
    TooManyClasses { classes: usize, limit: usize },

    #[error("missing required input: {0}")]
    MissingInput(&'static str),

    #[error("class {class} has {count} training samples, need at least 2")]
    ClassUndersampled { class: usize, count: usize },

    #[error("sample at ({x}, {y}) falls outside the map grid")]
    SampleOffGrid { x: f64, y: f64 },

    #[error("confusion matrix is empty")]
    EmptyMatrix,
}
