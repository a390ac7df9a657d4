use rand::{Rng, RngCore};

use super::config::ModelConfig;
use crate::ctc::{greedy_decode, LogProbLattice};
use crate::error::{invalid, Result};
use crate::raster::{GrayImage, WHITE};
use crate::tensor::{conv_output_len, Element, Mode, NormMode, RunningStats, Tape, Tensor, Var};

/// Maps an 8-bit pixel to [-1, 1]; white is 1.
pub fn normalize_pixel(v: u8) -> f32 {
    (v as f32 / 255.0 - 0.5) / 0.5
}

/// Height-normalized images padded to a common width.
///
/// `pixels` is `[N, H, W_max]`; rows are image rows, so each column is one
/// time step with `H` channels.
#[derive(Debug, Clone)]
pub struct ImageBatch {
    pixels: Tensor<f32>,
    widths: Vec<usize>,
}

impl ImageBatch {
    /// Pads every image on the right with background to the widest one.
    pub fn from_images<I: AsRef<GrayImage>>(images: &[I], height: usize) -> Result<Self> {
        if images.is_empty() {
            return Err(invalid("empty image batch"));
        }
        let widths: Vec<usize> = images.iter().map(|i| i.as_ref().width()).collect();
        let max_w = widths.iter().copied().max().unwrap_or(0);
        if max_w == 0 {
            return Err(invalid("zero-width image in batch"));
        }
        let mut data = vec![normalize_pixel(WHITE); images.len() * height * max_w];
        for (n, img) in images.iter().enumerate() {
            let img = img.as_ref();
            if img.height() != height {
                return Err(invalid(format!(
                    "image {n} is {} pixels tall, the model expects {height}",
                    img.height()
                )));
            }
            if img.width() == 0 {
                return Err(invalid(format!("image {n} has zero width")));
            }
            for y in 0..height {
                let dst = &mut data[(n * height + y) * max_w..][..img.width()];
                let src = &img.pixels()[y * img.width()..(y + 1) * img.width()];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = normalize_pixel(s);
                }
            }
        }
        Ok(Self {
            pixels: Tensor::new([images.len(), height, max_w], data)?,
            widths,
        })
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn padded_width(&self) -> usize {
        self.pixels.shape()[2]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn pixels(&self) -> &Tensor<f32> {
        &self.pixels
    }
}

impl AsRef<GrayImage> for GrayImage {
    fn as_ref(&self) -> &GrayImage {
        self
    }
}

#[derive(Debug, Clone)]
struct ConvPlan {
    weight: usize,
    bias: usize,
    stride: usize,
    dilation: usize,
}

#[derive(Debug, Clone)]
struct NormPlan {
    gamma: usize,
    beta: usize,
    stats: usize,
}

#[derive(Debug, Clone)]
struct SubBlockPlan {
    conv: ConvPlan,
    /// `None` for the final classifier projection.
    norm: Option<NormPlan>,
    dropout: f32,
}

#[derive(Debug, Clone)]
enum Skip {
    Identity,
    Projection(ConvPlan),
}

#[derive(Debug, Clone)]
struct BlockPlan {
    subs: Vec<SubBlockPlan>,
    skip: Option<Skip>,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    FanIn(usize),
    Zeros,
    Ones,
}

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F: Element = f32> {
    pub name: String,
    pub value: Tensor<F>,
}

/// One convolutional layer as built, read back from weight shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSummary {
    pub block: String,
    pub sub_block: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub dropout: f32,
    pub normalized: bool,
}

/// Result of a forward pass recorded on a tape.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[N, T', classes]` per-frame log-probabilities.
    pub log_probs: Var,
    /// Valid frames per sample.
    pub lengths: Vec<usize>,
    /// Tape handles of the trainable parameters, in [`EasterModel::params`] order.
    pub params: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct EasterModel<F: Element = f32> {
    config: ModelConfig,
    params: Vec<Param<F>>,
    stats: Vec<(String, RunningStats<F>)>,
    plan: Vec<BlockPlan>,
    mode: Mode,
}

struct Layout {
    plan: Vec<BlockPlan>,
    params: Vec<(String, Vec<usize>, Init)>,
    stats: Vec<(String, usize)>,
}

fn layout(config: &ModelConfig) -> Layout {
    let mut params = Vec::new();
    let mut stats = Vec::new();
    let mut conv = |prefix: &str, c_in: usize, c_out: usize, kernel: usize, stride, dilation| {
        let weight = params.len();
        params.push((format!("{prefix}.weight"), vec![c_out, c_in, kernel], Init::FanIn(c_in * kernel)));
        params.push((format!("{prefix}.bias"), vec![c_out], Init::Zeros));
        ConvPlan {
            weight,
            bias: weight + 1,
            stride,
            dilation,
        }
    };

    let mut plan = Vec::with_capacity(config.blocks.len());
    let mut channels = config.input_height;
    let last_block = config.blocks.len() - 1;
    let mut norms = Vec::new();
    for (bi, spec) in config.blocks.iter().enumerate() {
        let block_in = channels;
        let mut subs = Vec::with_capacity(spec.sub_blocks);
        for si in 0..spec.sub_blocks {
            let prefix = format!("block{bi}.sub{si}");
            let stride = if si == 0 { spec.stride } else { 1 };
            let c = conv(&format!("{prefix}.conv"), channels, spec.filters, spec.kernel, stride, spec.dilation);
            let classifier = bi == last_block && si + 1 == spec.sub_blocks;
            let norm = (!classifier).then(|| {
                norms.push((prefix.clone(), spec.filters));
                NormPlan {
                    gamma: usize::MAX,
                    beta: usize::MAX,
                    stats: norms.len() - 1,
                }
            });
            subs.push(SubBlockPlan {
                conv: c,
                norm,
                dropout: spec.dropout,
            });
            channels = spec.filters;
        }
        let skip = spec.residual.then(|| {
            if block_in == spec.filters && spec.stride == 1 {
                Skip::Identity
            } else {
                Skip::Projection(conv(&format!("block{bi}.skip"), block_in, spec.filters, 1, spec.stride, 1))
            }
        });
        plan.push(BlockPlan { subs, skip });
    }

    // Norm parameters follow all conv parameters so their indices are stable
    // regardless of block structure.
    for block in &mut plan {
        for sub in &mut block.subs {
            if let Some(norm) = sub.norm.as_mut() {
                let (prefix, ch) = &norms[norm.stats];
                norm.gamma = params.len();
                params.push((format!("{prefix}.bn.gamma"), vec![*ch], Init::Ones));
                norm.beta = params.len();
                params.push((format!("{prefix}.bn.beta"), vec![*ch], Init::Zeros));
                stats.push((format!("{prefix}.bn"), *ch));
            }
        }
    }
    Layout { plan, params, stats }
}

impl EasterModel<f32> {
    /// Builds a model with fan-in-scaled uniform conv weights, zero biases,
    /// unit gamma and zero beta.
    pub fn build<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        let specs = layout(&model.config).params;
        for (param, (_, _, init)) in model.params.iter_mut().zip(specs) {
            match init {
                Init::FanIn(fan_in) => {
                    let bound = (3.0 / fan_in as f64).sqrt() as f32;
                    for v in param.value.data_mut() {
                        *v = rng.random_range(-bound..bound);
                    }
                }
                Init::Ones => param.value.data_mut().fill(1.0),
                Init::Zeros => {}
            }
        }
        Ok(model)
    }
}

impl<F: Element> EasterModel<F> {
    /// Correctly shaped model with every parameter zero (gamma one).
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let Layout { plan, params, stats } = layout(&config);
        let params = params
            .into_iter()
            .map(|(name, shape, init)| Param {
                name,
                value: match init {
                    Init::Ones => Tensor::full(shape, F::one()),
                    _ => Tensor::zeros(shape),
                },
            })
            .collect();
        let stats = stats
            .into_iter()
            .map(|(name, ch)| (name, RunningStats::new(ch)))
            .collect();
        Ok(Self {
            config,
            params,
            stats,
            plan,
            mode: Mode::Train,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn params(&self) -> &[Param<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<F>] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[(String, RunningStats<F>)] {
        &self.stats
    }

    pub fn running_stats_mut(&mut self) -> &mut [(String, RunningStats<F>)] {
        &mut self.stats
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn cast<G: Element>(&self) -> EasterModel<G> {
        EasterModel {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                })
                .collect(),
            stats: self.stats.iter().map(|(n, s)| (n.clone(), s.cast())).collect(),
            plan: self.plan.clone(),
            mode: self.mode,
        }
    }

    pub fn layers(&self) -> Vec<LayerSummary> {
        let mut out = Vec::new();
        for (spec, block) in self.config.blocks.iter().zip(&self.plan) {
            for (si, sub) in block.subs.iter().enumerate() {
                let shape = self.params[sub.conv.weight].value.shape();
                out.push(LayerSummary {
                    block: spec.name.clone(),
                    sub_block: si,
                    in_channels: shape[1],
                    filters: shape[0],
                    kernel: shape[2],
                    dilation: sub.conv.dilation,
                    stride: sub.conv.stride,
                    dropout: sub.dropout,
                    normalized: sub.norm.is_some(),
                });
            }
        }
        out
    }

    /// Forward pass in the model's current mode.
    ///
    /// Train mode applies dropout and folds batch statistics into the
    /// running stats.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape<F>,
        batch: &ImageBatch,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        let mode = self.mode;
        let mut stats = std::mem::take(&mut self.stats);
        let out = run(&self.config, &self.plan, &self.params, &mut stats, tape, batch, mode, rng);
        self.stats = stats;
        out
    }

    /// Inference-mode forward pass that leaves the model untouched.
    pub fn forward_infer(&self, tape: &mut Tape<F>, batch: &ImageBatch) -> Result<ForwardOutput> {
        let mut stats = self.stats.clone();
        let mut rng = NoRng;
        run(&self.config, &self.plan, &self.params, &mut stats, tape, batch, Mode::Infer, &mut rng)
    }

    /// Per-sample lattices in inference mode.
    pub fn infer(&self, batch: &ImageBatch) -> Result<Vec<LogProbLattice>> {
        let mut tape = Tape::no_grad();
        let out = self.forward_infer(&mut tape, batch)?;
        lattices(&tape, &out)
    }

    /// Greedy transcripts for images already at the model's input height.
    pub fn transcribe<I: AsRef<GrayImage>>(&self, images: &[I]) -> Result<Vec<String>> {
        let batch = ImageBatch::from_images(images, self.config.input_height)?;
        Ok(self
            .infer(&batch)?
            .iter()
            .map(|l| greedy_decode(l, &self.config.vocab))
            .collect())
    }
}

/// Dropout never fires in inference, so no randomness is consumed.
struct NoRng;

impl RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not draw random numbers")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not draw random numbers")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("inference does not draw random numbers")
    }
}

#[allow(clippy::too_many_arguments)]
fn run<F: Element, R: Rng + ?Sized>(
    config: &ModelConfig,
    plan: &[BlockPlan],
    params: &[Param<F>],
    stats: &mut [(String, RunningStats<F>)],
    tape: &mut Tape<F>,
    batch: &ImageBatch,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput> {
    if batch.height() != config.input_height {
        return Err(invalid(format!(
            "batch is {} pixels tall, the model expects {}",
            batch.height(),
            config.input_height
        )));
    }
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.value.clone())).collect();
    let mut lengths = batch.widths().to_vec();
    let input = tape.constant(batch.pixels().cast());
    let mut x = tape.mask_time(input, &lengths)?;

    for block in plan {
        let block_in = x;
        let n_subs = block.subs.len();
        for (si, sub) in block.subs.iter().enumerate() {
            let c = &sub.conv;
            x = tape.conv1d(x, vars[c.weight], vars[c.bias], c.stride, c.dilation)?;
            lengths.iter_mut().for_each(|l| *l = conv_output_len(*l, c.stride));
            let Some(norm) = &sub.norm else {
                continue;
            };
            let norm_mode = match mode {
                Mode::Train => NormMode::Train(&mut stats[norm.stats].1),
                Mode::Infer => NormMode::Infer(&stats[norm.stats].1),
            };
            x = tape.batch_norm(x, vars[norm.gamma], vars[norm.beta], norm_mode, Some(&lengths))?;
            if si + 1 == n_subs {
                if let Some(skip) = &block.skip {
                    let residual = match skip {
                        Skip::Identity => block_in,
                        Skip::Projection(p) => {
                            tape.conv1d(block_in, vars[p.weight], vars[p.bias], p.stride, p.dilation)?
                        }
                    };
                    x = tape.add(x, residual)?;
                }
            }
            x = tape.relu(x);
            x = tape.dropout(x, sub.dropout, mode, rng)?;
            x = tape.mask_time(x, &lengths)?;
        }
    }

    let frames_first = tape.swap_last_axes(x)?;
    let log_probs = tape.log_softmax(frames_first);
    Ok(ForwardOutput {
        log_probs,
        lengths,
        params: vars,
    })
}

/// Splits a batched forward output into per-sample lattices.
pub fn lattices<F: Element>(tape: &Tape<F>, out: &ForwardOutput) -> Result<Vec<LogProbLattice>> {
    let value = tape.value(out.log_probs);
    let (frames, classes) = (value.shape()[1], value.shape()[2]);
    value
        .data()
        .chunks(frames * classes)
        .zip(&out.lengths)
        .map(|(chunk, &len)| {
            LogProbLattice::with_valid_length(
                chunk.iter().map(|v| v.as_f64()).collect(),
                frames,
                classes,
                len,
            )
        })
        .collect()
}
