//! Recurrence-free 1-D convolutional text recognition.
//!
//! The crate covers the whole pipeline: a small reverse-mode tensor engine,
//! CTC (plain and class-weighted) with greedy decoding, the configurable
//! convolutional recognizer, a seeded synthetic data generator, an image
//! augmentation pipeline, WER/CER metrics, and the training loop.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod augment;
pub mod ctc;
pub mod datagen;
pub mod error;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod rng;
pub mod tensor;
pub mod trainer;

mod container;

pub use ctc::{LabelSequence, LogProbLattice, Vocabulary, WeightedCtcConfig};
pub use error::{Error, Result};
pub use model::{EasterModel, ImageBatch, ModelConfig, Preset};
pub use raster::GrayImage;
pub use tensor::{Element, Mode, Tape, Tensor, Var};
