//! Patch quantum generator, classical discriminator and adversarial training.
//!
//! Each sub-generator is an `n_qubits` circuit: latent angles embedded with
//! RY gates, then `depth` layers of trainable RY rotations and a CZ ladder.
//! The top qubit is an ancilla; conditioning it on 0 gives a non-linear map
//! from the measured distribution to a patch of `2^(n_qubits-1)` pixels,
//! which is rescaled so its brightest pixel is 1. Four 16-pixel patches tile
//! an 8×8 image.

mod checkpoint;
mod dataset;
mod discriminator;
mod generator;
mod loss;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimError;

pub use checkpoint::GanCheckpoint;
pub use dataset::{generate_images, LabeledImage, LabeledImageSet, DATASET_HEADER};
pub use discriminator::{sigmoid, DiscGrads, DiscTrace, DiscriminatorModel, Linear, DISCRIMINATOR_WIDTHS};
pub use generator::{
    assemble_image, backward_pass, backward_shifted, disassemble_image, embed_latent, forward_pass,
    generator_forward, normalize_patch, patch_vjp, postselect_ancilla, schedule_label, subgenerator_circuit,
    subgenerator_forward, trainable_op_indices, ForwardPass, GeneratorModel, LatentVector, ScheduleEntry, NOISELESS,
};
pub use loss::{bce_grad, bce_grad_logit, bce_loss, BCE_EPS};
pub use train::{
    continue_training, generator_gradient, train_qgan, EpochRecord, GanTrainConfig, GradientMethod, Stage,
    TrainOutcome,
};

/// Pixels in an 8×8 image.
pub const IMAGE_PIXELS: usize = 64;
/// Side length of an [`Image8`].
pub const IMAGE_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum QganError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid latent vector: {0}")]
    Latent(String),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no data: {0}")]
    EmptyData(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Row-major 8×8 grayscale image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Image8(Vec<f64>);

impl Image8 {
    pub fn new(pixels: Vec<f64>) -> Result<Self, QganError> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(QganError::Shape(format!("image has {} pixels, expected {IMAGE_PIXELS}", pixels.len())));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QganError::Shape(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self(pixels))
    }

    pub fn filled(value: f64) -> Result<Self, QganError> {
        Self::new(vec![value; IMAGE_PIXELS])
    }

    pub fn pixels(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * IMAGE_SIDE + col]
    }
}

impl TryFrom<Vec<f64>> for Image8 {
    type Error = QganError;

    fn try_from(v: Vec<f64>) -> Result<Self, QganError> {
        Image8::new(v)
    }
}

impl From<Image8> for Vec<f64> {
    fn from(img: Image8) -> Self {
        img.0
    }
}
