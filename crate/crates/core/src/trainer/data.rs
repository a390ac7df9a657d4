use std::path::Path;

use rayon::prelude::*;

use crate::ctc::{LabelSequence, Vocabulary};
use crate::datagen::Manifest;
use crate::error::{Error, Result};
use crate::model::{ImageBatch, ModelConfig};
use crate::raster::GrayImage;

/// A transcribed image already at the model's input height.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub transcript: String,
    pub label: LabelSequence,
    pub image: GrayImage,
}

/// Rescales to `height` preserving aspect ratio; images already that tall are untouched.
pub fn fit_height(image: GrayImage, height: usize) -> GrayImage {
    if image.height() == height {
        image
    } else {
        image.resize_to_height(height)
    }
}

pub fn encode_label(id: &str, transcript: &str, vocab: &Vocabulary) -> Result<LabelSequence> {
    if let Some(c) = transcript.chars().find(|&c| !vocab.contains(c)) {
        return Err(Error::Data {
            sample: id.to_string(),
            message: format!("character {c:?} is not in the vocabulary"),
        });
    }
    vocab.encode(transcript)
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    /// Loads every manifest image as grayscale at `height`, in manifest order.
    pub fn from_manifest(manifest: &Manifest, vocab: &Vocabulary, height: usize) -> Result<Self> {
        let samples = manifest
            .entries()
            .par_iter()
            .map(|entry| {
                let id = entry.path.to_string_lossy().into_owned();
                let label = encode_label(&id, &entry.transcript, vocab)?;
                let image = fit_height(GrayImage::load(&manifest.resolve(entry))?, height);
                Ok(Sample {
                    id,
                    transcript: entry.transcript.clone(),
                    label,
                    image,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    pub fn load(manifest_path: &Path, vocab: &Vocabulary, height: usize) -> Result<Self> {
        Self::from_manifest(&Manifest::load(manifest_path)?, vocab, height)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Dataset {
        Dataset::new(self.samples[..n.min(self.len())].to_vec())
    }
}

/// Padded images with labels and lattice lengths.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: ImageBatch,
    pub labels: Vec<LabelSequence>,
    /// Valid lattice frames per sample.
    pub lengths: Vec<usize>,
    pub ids: Vec<String>,
    pub transcripts: Vec<String>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One element of [`make_batch`] input; the image may have any height.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub id: &'a str,
    pub transcript: &'a str,
    pub image: &'a GrayImage,
}

/// Rescales to the model height, pads to the widest image with background
/// and encodes labels.
pub fn make_batch(items: &[BatchItem<'_>], model: &ModelConfig) -> Result<Batch> {
    if items.is_empty() {
        return Err(crate::error::invalid("cannot build an empty batch"));
    }
    let mut images = Vec::with_capacity(items.len());
    let mut labels = Vec::with_capacity(items.len());
    for item in items {
        labels.push(encode_label(item.id, item.transcript, &model.vocab)?);
        images.push(fit_height(item.image.clone(), model.input_height));
    }
    let lengths = images.iter().map(|i| model.output_length(i.width())).collect();
    Ok(Batch {
        images: ImageBatch::from_images(&images, model.input_height)?,
        labels,
        lengths,
        ids: items.iter().map(|i| i.id.to_string()).collect(),
        transcripts: items.iter().map(|i| i.transcript.to_string()).collect(),
    })
}
