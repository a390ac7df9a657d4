//! Resumable training state: model, optimizer moments and loop counters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::Adam;
use crate::container::{self, Blob, Container};
use crate::error::{io_at, Error, Result};
use crate::model::{model_from_blobs, model_to_blobs, EasterModel, ModelConfig};

pub const STATE_MAGIC: &[u8; 4] = b"ESTS";
pub const STATE_VERSION: u32 = 1;

const MODEL_PREFIX: &str = "model/";
const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";

/// Loop counters stored alongside the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    /// Optimizer steps completed.
    pub step: u64,
    pub seed: u64,
    pub best_cer: Option<f64>,
    pub skipped_samples: u64,
    /// Loss sum and count since the last metrics row.
    pub pending_loss_sum: f64,
    pub pending_loss_count: u64,
    /// Seconds spent training before this state was written.
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub progress: Progress,
    pub model: EasterModel<f32>,
    pub adam: Adam,
}

#[derive(Serialize, Deserialize)]
struct Header {
    progress: Progress,
    adam_t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    model: String,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl TrainState {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = Header {
            progress: self.progress.clone(),
            adam_t: self.adam.t,
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps: self.adam.eps,
            weight_decay: self.adam.weight_decay,
            model: toml::to_string(self.model.config())
                .map_err(|e| Error::Config(format!("cannot serialize model config: {e}")))?,
        };
        let mut blobs: Vec<Blob> = model_to_blobs(&self.model)
            .into_iter()
            .map(|b| Blob {
                name: format!("{MODEL_PREFIX}{}", b.name),
                ..b
            })
            .collect();
        for (i, p) in self.model.params().iter().enumerate() {
            for (prefix, data) in [(M_PREFIX, &self.adam.m[i]), (V_PREFIX, &self.adam.v[i])] {
                blobs.push(Blob {
                    name: format!("{prefix}{}", p.name),
                    shape: p.value.shape().to_vec(),
                    data: data.clone(),
                });
            }
        }
        Ok(container::encode(
            STATE_MAGIC,
            STATE_VERSION,
            &Container {
                header: serde_json::to_string(&header).expect("state header serializes"),
                blobs,
            },
        ))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let c = container::decode(bytes, STATE_MAGIC, STATE_VERSION)?;
        let header: Header =
            serde_json::from_str(&c.header).map_err(|e| corrupt(format!("unreadable state header: {e}")))?;
        let config: ModelConfig =
            toml::from_str(&header.model).map_err(|e| corrupt(format!("unreadable model config: {e}")))?;
        let mut model_blobs = Vec::new();
        let mut moments = std::collections::HashMap::new();
        for b in c.blobs {
            if let Some(name) = b.name.strip_prefix(MODEL_PREFIX) {
                model_blobs.push(Blob {
                    name: name.to_string(),
                    ..b
                });
            } else if b.name.starts_with(M_PREFIX) || b.name.starts_with(V_PREFIX) {
                moments.insert(b.name.clone(), b);
            } else {
                return Err(corrupt(format!("unexpected tensor {}", b.name)));
            }
        }
        let model = model_from_blobs(config, model_blobs)?;
        let mut take = |prefix: &str, name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let key = format!("{prefix}{name}");
            let b = moments.remove(&key).ok_or_else(|| corrupt(format!("missing tensor {key}")))?;
            if b.shape != shape {
                return Err(corrupt(format!("tensor {key} has shape {:?}", b.shape)));
            }
            Ok(b.data)
        };
        let (mut m, mut v) = (Vec::new(), Vec::new());
        for p in model.params() {
            m.push(take(M_PREFIX, &p.name, p.value.shape())?);
            v.push(take(V_PREFIX, &p.name, p.value.shape())?);
        }
        if let Some(extra) = moments.keys().next() {
            return Err(corrupt(format!("unexpected tensor {extra}")));
        }
        Ok(Self {
            progress: header.progress,
            model,
            adam: Adam {
                beta1: header.beta1,
                beta2: header.beta2,
                eps: header.eps,
                weight_decay: header.weight_decay,
                t: header.adam_t,
                m,
                v,
            },
        })
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode()?).map_err(io_at(&tmp))?;
        fs::rename(&tmp, path).map_err(io_at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(io_at(path))?)
    }
}
