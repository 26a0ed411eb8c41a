use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid viewing setup: {0}")]
    InvalidSetup(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("image of {width}x{height} is too small for a {levels}-level pyramid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("pyramid level {level} out of range 0..={max}")]
    LevelOutOfRange { level: f64, max: usize },

    #[error("negative eccentricity {0}")]
    NegativeEccentricity(f64),

    #[error("frequency limits must be positive (got {low}, {high})")]
    NonPositiveFrequency { low: f64, high: f64 },

    #[error("frequency distribution is empty")]
    EmptyBand,

    #[error("blur is zero at this location")]
    NoBlur,

    #[error("cannot downscale {from:?} to {to:?}")]
    Downscale {
        from: (usize, usize),
        to: (usize, usize),
    },

    #[error("eccentricity ring {center}±{half_width} deg does not fit the image")]
    RingOutsideImage { center: f64, half_width: f64 },

    #[error("{clipped:.4} of pixels clipped, above the {limit} guard")]
    ExcessiveClipping { clipped: f64, limit: f64 },

    #[error("need at least {needed} frames, got {got}")]
    NotEnoughFrames { needed: usize, got: usize },

    #[error("{0}")]
    Parse(String),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("exr: {0}")]
    Exr(#[from] exr::error::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by reading or writing files rather than by
    /// bad parameters.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Image(_) | Error::Exr(_) | Error::Csv(_)
        )
    }
}
