//! Hardware-noise watermarking for patch quantum GANs.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`] evolves density matrices of small circuits under noise channels
//!   derived from a [`sim::HardwareProfile`].
//! * [`qgan`] holds the patch generator, the classical discriminator and the
//!   adversarial training loop. A generator trained under a given profile
//!   (or sequence of profiles) carries that hardware's noise signature in its
//!   parameters.
//! * [`imaging`] covers digit ingestion, upscaling and the Fréchet distance.
//! * [`extractor`] is the CNN that attributes generated images to their
//!   training hardware, plus the threshold and ownership verdict logic.
//! * [`experiments`] wires everything into reproducible end-to-end commands.
//!
//! With the default `parallel` feature, independent circuit evaluations and
//! per-sample CNN gradients are spread over a rayon pool. Reductions always
//! happen in a fixed order, so results are bit-identical with the feature off.

pub mod error;
pub mod experiments;
pub mod extractor;
pub mod imaging;
pub mod par;
pub mod qgan;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
