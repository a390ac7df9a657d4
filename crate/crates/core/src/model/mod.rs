//! Configuration-driven recognizer: stacks of Conv1D → BatchNorm → ReLU →
//! Dropout sub-blocks ending in a per-frame log-softmax over the vocabulary.
//!
//! An input image of height `H` is read as a sequence along its width with
//! `H` channels per step.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{load_checkpoint, load_checkpoint_with_vocab, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{BlockSpec, ModelConfig, Preset, DEFAULT_INPUT_HEIGHT};
pub use network::{lattices, normalize_pixel, EasterModel, ForwardOutput, ImageBatch, LayerSummary, Param};
pub(crate) use checkpoint::{model_from_blobs, model_to_blobs};
#[cfg(test)]
pub(crate) use checkpoint::encode_checkpoint;
