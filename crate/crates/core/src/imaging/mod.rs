//! Digit ingestion, upscaling for the classifier, and the Fréchet distance
//! between Gaussian fits of two image populations.

mod digits;
mod fid;
mod upscale;

use thiserror::Error;

pub use digits::{bundled_digits, load_digits, read_digits, write_digits, DigitsRecord, DIGIT_MAX};
pub use fid::{fid, fid_images, gaussian_stats, GaussianStats};
pub use upscale::{upscale, upscale_pixels, GrayImage, Interpolation};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("{source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
}
