use std::fs;
use std::path::Path;

use super::{EasterModel, ModelConfig};
use crate::container::{self, Blob, Container};
use crate::ctc::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ESTR";
pub const CHECKPOINT_VERSION: u32 = 1;

const MEAN_SUFFIX: &str = ".running_mean";
const VAR_SUFFIX: &str = ".running_var";

pub(crate) fn model_to_blobs(model: &EasterModel<f32>) -> Vec<Blob> {
    let mut blobs: Vec<Blob> = model
        .params()
        .iter()
        .map(|p| Blob {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            data: p.value.data().to_vec(),
        })
        .collect();
    for (name, stats) in model.running_stats() {
        blobs.push(Blob {
            name: format!("{name}{MEAN_SUFFIX}"),
            shape: vec![stats.channels()],
            data: stats.mean.clone(),
        });
        blobs.push(Blob {
            name: format!("{name}{VAR_SUFFIX}"),
            shape: vec![stats.channels()],
            data: stats.var.clone(),
        });
    }
    blobs
}

/// Fills a freshly shaped model from `blobs`, which must name every
/// parameter and running statistic exactly once.
pub(crate) fn model_from_blobs(config: ModelConfig, blobs: Vec<Blob>) -> Result<EasterModel<f32>> {
    let mut model = EasterModel::<f32>::zeroed(config)
        .map_err(|e| Error::CorruptCheckpoint(format!("stored config is invalid: {e}")))?;
    let expected = model.params().len() + 2 * model.running_stats().len();
    if blobs.len() != expected {
        return Err(Error::CorruptCheckpoint(format!(
            "expected {expected} tensors, found {}",
            blobs.len()
        )));
    }
    let mut by_name: std::collections::HashMap<String, Blob> =
        blobs.into_iter().map(|b| (b.name.clone(), b)).collect();
    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
        let blob = by_name
            .remove(name)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
        if blob.shape != shape {
            return Err(Error::CorruptCheckpoint(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                blob.shape
            )));
        }
        Ok(blob.data)
    };
    for p in model.params_mut() {
        let data = take(&p.name, p.value.shape())?;
        p.value = Tensor::new(p.value.shape().to_vec(), data)?;
    }
    for (name, stats) in model.running_stats_mut() {
        let ch = [stats.channels()];
        stats.mean = take(&format!("{name}{MEAN_SUFFIX}"), &ch)?;
        stats.var = take(&format!("{name}{VAR_SUFFIX}"), &ch)?;
    }
    Ok(model)
}

pub(crate) fn encode_checkpoint(model: &EasterModel<f32>) -> Result<Vec<u8>> {
    let header = toml::to_string(model.config())
        .map_err(|e| Error::Config(format!("cannot serialize model config: {e}")))?;
    Ok(container::encode(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        &Container {
            header,
            blobs: model_to_blobs(model),
        },
    ))
}

pub(crate) fn decode_checkpoint(bytes: &[u8]) -> Result<EasterModel<f32>> {
    let c = container::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let config: ModelConfig = toml::from_str(&c.header)
        .map_err(|e| Error::CorruptCheckpoint(format!("unreadable model config: {e}")))?;
    model_from_blobs(config, c.blobs)
}

/// Writes config, parameters and running statistics to `path`.
pub fn save_checkpoint(model: &EasterModel<f32>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    // Write-then-rename so an interrupted save never leaves a torn file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EasterModel<f32>> {
    let bytes = fs::read(path)?;
    let mut model = decode_checkpoint(&bytes)?;
    model.set_mode(crate::tensor::Mode::Infer);
    Ok(model)
}

/// Loads a checkpoint and rejects it unless its vocabulary equals `vocab`.
pub fn load_checkpoint_with_vocab(path: &Path, vocab: &Vocabulary) -> Result<EasterModel<f32>> {
    let model = load_checkpoint(path)?;
    if &model.config().vocab != vocab {
        return Err(Error::VocabularyMismatch {
            stored: model.config().vocab.as_string(),
            requested: vocab.as_string(),
        });
    }
    Ok(model)
}
