//! Training loop for the recognizer.
//!
//! All randomness in a run derives from the config seed and the step
//! number: the epoch permutation, per-sample augmentation seeds and dropout
//! masks for step `s` never depend on earlier steps. Resuming from a saved
//! [`TrainState`] therefore continues the exact trajectory of an
//! uninterrupted run.

mod config;
mod data;
mod optim;
mod state;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

pub use config::{
    AugmentPreset, AugmentSection, ModelSection, OptimizerConfig, TrainingConfig, WeightedCtc,
};
pub use data::{encode_label, fit_height, make_batch, Batch, BatchItem, Dataset, Sample};
pub use optim::{clip_scale, global_norm, Adam};
pub use state::{Progress, TrainState, STATE_MAGIC, STATE_VERSION};

use crate::augment::AugmentPipeline;
use crate::ctc::{ctc_loss_and_grad, greedy_decode, weighted_ctc_loss_and_grad, WeightedCtcConfig};
use crate::datagen::Manifest;
use crate::error::{io_at, Error, Result};
use crate::metrics::EvalReport;
use crate::model::{lattices, save_checkpoint, EasterModel, ImageBatch, ModelConfig};
use crate::raster::GrayImage;
use crate::rng::substream_rng;
use crate::tensor::{Mode, Tape, Tensor};

pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_HEADER: &str = "step,train_loss,val_cer,val_wer,wall_time";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const STATE_FILE: &str = "train.state";
pub const CONFIG_COPY: &str = "config.toml";
pub const WORKERS_ENV: &str = "EASTER_NUM_WORKERS";

const SALT_SHUFFLE: u64 = 1;
const SALT_AUGMENT: u64 = 2;
const SALT_DROPOUT: u64 = 3;
const SALT_INIT: u64 = 4;

/// Data-loading threads: `EASTER_NUM_WORKERS` if set to a positive integer, else all cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 0-based index of the step just taken.
    pub step: u64,
    /// Mean CTC loss over the feasible samples; `None` when every sample was skipped.
    pub loss: Option<f64>,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// One metrics CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub train_loss: Option<f64>,
    pub val_cer: Option<f64>,
    pub val_wer: Option<f64>,
    pub wall_time: f64,
    /// CER on the training subset; kept in memory only.
    pub train_cer: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.3}",
            self.step,
            opt(self.train_loss),
            opt(self.val_cer),
            opt(self.val_wer),
            self.wall_time
        )
    }
}

/// Parses a metrics CSV written by [`Trainer::fit`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == METRICS_HEADER => {}
        Some(h) => return Err(Error::Config(format!("unexpected metrics header {h:?}"))),
        None => return Err(Error::Config("metrics CSV is empty".into())),
    }
    let field = |s: &str, line: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad metrics value {s:?} in line {line:?}")))
    };
    lines
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Config(format!("metrics line {line:?} needs 5 columns")));
            }
            Ok(MetricsRow {
                step: cols[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad step in line {line:?}")))?,
                train_loss: field(cols[1], line)?,
                val_cer: field(cols[2], line)?,
                val_wer: field(cols[3], line)?,
                wall_time: field(cols[4], line)?.unwrap_or(0.0),
                train_cer: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub history: Vec<MetricsRow>,
    /// Steps completed, including any before a resume.
    pub steps: u64,
    pub best_cer: Option<f64>,
    pub skipped_samples: u64,
    pub interrupted: bool,
    pub stopped_early: bool,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub state_file: PathBuf,
}

pub struct Trainer {
    config: TrainingConfig,
    model: EasterModel<f32>,
    adam: Adam,
    weighted: Option<WeightedCtcConfig>,
    pipeline: AugmentPipeline,
    train: Dataset,
    val: Option<Dataset>,
    pool: rayon::ThreadPool,
    progress: Progress,
    total_steps: u64,
}

impl Trainer {
    /// Loads the manifests named in `config` and initializes a fresh model.
    pub fn new(config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let model_cfg = config.model.resolve();
        let train_manifest = Manifest::load(&config.train_manifest)?;
        let val_manifest = config.val_manifest.as_deref().map(Manifest::load).transpose()?;
        if let Some(val) = &val_manifest {
            let train_paths: HashSet<PathBuf> = train_manifest.resolved_paths().into_iter().collect();
            let shared = val.resolved_paths().iter().filter(|p| train_paths.contains(*p)).count();
            if shared > 0 {
                return Err(Error::Config(format!(
                    "validation manifest shares {shared} images with the training manifest"
                )));
            }
        }
        let pool = build_pool()?;
        let (train, val) = pool.install(|| -> Result<_> {
            let train = Dataset::from_manifest(&train_manifest, &model_cfg.vocab, model_cfg.input_height)?;
            let val = val_manifest
                .map(|m| Dataset::from_manifest(&m, &model_cfg.vocab, model_cfg.input_height))
                .transpose()?;
            Ok((train, val))
        })?;
        Self::assemble(config, train, val, pool)
    }

    /// Trains on in-memory datasets; `config.train_manifest` is ignored.
    pub fn with_datasets(config: TrainingConfig, train: Dataset, val: Option<Dataset>) -> Result<Self> {
        Self::assemble(config, train, val, build_pool()?)
    }

    fn assemble(config: TrainingConfig, train: Dataset, val: Option<Dataset>, pool: rayon::ThreadPool) -> Result<Self> {
        let mut check = config.clone();
        if check.train_manifest.as_os_str().is_empty() {
            check.train_manifest = PathBuf::from("-");
        }
        check.validate()?;
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let model_cfg = config.model.resolve();
        let mut init = substream_rng(config.seed, 0, SALT_INIT);
        let model = EasterModel::build(model_cfg, &mut init)?;
        let adam = Adam::new(&config.optimizer, model.params());
        let steps_per_epoch = train.len().div_ceil(config.batch_size) as u64;
        let total_steps = match config.max_epochs {
            Some(e) => config.max_steps.min(e * steps_per_epoch),
            None => config.max_steps,
        };
        Ok(Self {
            weighted: config.weighted_ctc.config()?,
            pipeline: config.augment.resolve(),
            progress: Progress {
                step: 0,
                seed: config.seed,
                best_cer: None,
                skipped_samples: 0,
                pending_loss_sum: 0.0,
                pending_loss_count: 0,
                elapsed_secs: 0.0,
            },
            config,
            model,
            adam,
            train,
            val,
            pool,
            total_steps,
        })
    }

    /// Continues from a state file written by [`Trainer::fit`] or [`Trainer::save_state`].
    pub fn resume(config: TrainingConfig, state_path: &Path) -> Result<Self> {
        let mut t = Self::new(config)?;
        t.restore(TrainState::load(state_path)?)?;
        Ok(t)
    }

    pub fn restore(&mut self, state: TrainState) -> Result<()> {
        if state.model.config() != self.model.config() {
            return Err(Error::Config("state file was written for a different model configuration".into()));
        }
        if state.progress.seed != self.config.seed {
            return Err(Error::Config(format!(
                "state file was written with seed {}, config has {}",
                state.progress.seed, self.config.seed
            )));
        }
        self.model = state.model;
        self.adam = state.adam;
        self.progress = state.progress;
        Ok(())
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            progress: self.progress.clone(),
            model: self.model.clone(),
            adam: self.adam.clone(),
        }
    }

    pub fn save_state(&self, path: &Path) -> Result<()> {
        self.state().save(path)
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn model(&self) -> &EasterModel<f32> {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut EasterModel<f32> {
        &mut self.model
    }

    pub fn into_model(self) -> EasterModel<f32> {
        self.model
    }

    pub fn progress(&self) -> &Progress {
        &self.progress
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn val_set(&self) -> Option<&Dataset> {
        self.val.as_ref()
    }

    /// Training-set indices used at `step`.
    pub fn batch_indices(&self, step: u64) -> Vec<usize> {
        let n = self.train.len();
        let bs = self.config.batch_size.min(n);
        let per_epoch = n.div_ceil(bs) as u64;
        let (epoch, slot) = (step / per_epoch, (step % per_epoch) as usize);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut substream_rng(self.config.seed, epoch, SALT_SHUFFLE));
        perm[slot * bs..((slot + 1) * bs).min(n)].to_vec()
    }

    /// Augmented batch for `step` and the number of samples dropped as infeasible.
    pub fn batch_for_step(&self, step: u64) -> Result<(Option<Batch>, usize)> {
        let indices = self.batch_indices(step);
        let mut seeds = substream_rng(self.config.seed, step, SALT_AUGMENT);
        let jobs: Vec<(usize, u64)> = indices.iter().map(|&i| (i, seeds.random())).collect();
        let cfg = self.model.config();
        let images: Vec<_> = self.pool.install(|| {
            jobs.par_iter()
                .map(|&(i, seed)| {
                    let img = &self.train.samples()[i].image;
                    if self.pipeline.is_empty() {
                        img.clone()
                    } else {
                        fit_height(self.pipeline.apply(img, seed), cfg.input_height)
                    }
                })
                .collect()
        });
        let mut items = Vec::with_capacity(indices.len());
        let mut skipped = 0;
        for (&i, image) in indices.iter().zip(&images) {
            let s = &self.train.samples()[i];
            if s.label.min_frames() > cfg.output_length(image.width()) {
                log::warn!(
                    "skipping {}: {:?} needs {} frames, image gives {}",
                    s.id,
                    s.transcript,
                    s.label.min_frames(),
                    cfg.output_length(image.width())
                );
                skipped += 1;
                continue;
            }
            items.push(BatchItem {
                id: &s.id,
                transcript: &s.transcript,
                image,
            });
        }
        if items.is_empty() {
            return Ok((None, skipped));
        }
        Ok((Some(make_batch(&items, cfg)?), skipped))
    }

    /// One optimizer update on `batch`, with dropout drawn for `step`.
    pub fn step_on_batch(&mut self, batch: &Batch, step: u64) -> Result<StepReport> {
        let lr = self.config.optimizer.lr_at(step, self.total_steps);
        let mut dropout_rng = substream_rng(self.config.seed, step, SALT_DROPOUT);
        self.model.set_mode(Mode::Train);
        let mut tape = Tape::new();
        let out = self.model.forward(&mut tape, &batch.images, &mut dropout_rng)?;
        let lats = lattices(&tape, &out)?;
        let n = batch.len();
        let shape = tape.value(out.log_probs).shape().to_vec();
        let per_sample = shape[1] * shape[2];
        let mut grad = vec![0.0f32; n * per_sample];
        let mut losses = Vec::with_capacity(n);
        for (i, (lat, label)) in lats.iter().zip(&batch.labels).enumerate() {
            let o = match &self.weighted {
                Some(w) => weighted_ctc_loss_and_grad(lat, label, w)?,
                None => ctc_loss_and_grad(lat, label)?,
            };
            for (g, &v) in grad[i * per_sample..(i + 1) * per_sample].iter_mut().zip(&o.grad) {
                *g = (v / n as f64) as f32;
            }
            losses.push(o.loss);
        }
        let loss = losses.iter().sum::<f64>() / n as f64;
        if !loss.is_finite() {
            let path = self.dump_diagnostics(step, batch, &losses, None);
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("mean loss {loss}; diagnostics in {path}"),
            });
        }
        let loss_var = tape.external_loss(out.log_probs, loss, Tensor::new(shape, grad)?)?;
        tape.backward(loss_var)?;
        let grads: Vec<Tensor<f32>> = out
            .params
            .iter()
            .zip(self.model.params())
            .map(|(&v, p)| tape.take_grad(v).unwrap_or_else(|| Tensor::zeros(p.value.shape().to_vec())))
            .collect();
        let grad_norm = global_norm(&grads);
        if !grad_norm.is_finite() {
            let path = self.dump_diagnostics(step, batch, &losses, Some(&grads));
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("gradient norm {grad_norm}; diagnostics in {path}"),
            });
        }
        let scale = clip_scale(grad_norm, self.config.optimizer.clip_norm);
        self.adam.update(self.model.params_mut(), &grads, lr, scale);
        Ok(StepReport {
            step,
            loss: Some(loss),
            grad_norm,
            lr,
            samples: n,
            skipped: 0,
        })
    }

    /// Builds the batch for the current step and trains on it.
    pub fn train_step(&mut self) -> Result<StepReport> {
        let step = self.progress.step;
        let (batch, skipped) = self.batch_for_step(step)?;
        let mut report = match batch {
            Some(b) => self.step_on_batch(&b, step)?,
            None => StepReport {
                step,
                loss: None,
                grad_norm: 0.0,
                lr: self.config.optimizer.lr_at(step, self.total_steps),
                samples: 0,
                skipped: 0,
            },
        };
        report.skipped = skipped;
        self.progress.step += 1;
        self.progress.skipped_samples += skipped as u64;
        if let Some(l) = report.loss {
            self.progress.pending_loss_sum += l;
            self.progress.pending_loss_count += 1;
        }
        Ok(report)
    }

    fn dump_diagnostics(&self, step: u64, batch: &Batch, losses: &[f64], grads: Option<&[Tensor<f32>]>) -> String {
        let mut text = format!("step {step}\nlr {}\n\nid\ttranscript\twidth\tloss\n", self.config.optimizer.lr_at(step, self.total_steps));
        for (i, id) in batch.ids.iter().enumerate() {
            let _ = writeln!(
                text,
                "{id}\t{}\t{}\t{}",
                batch.transcripts[i],
                batch.images.widths()[i],
                losses.get(i).copied().unwrap_or(f64::NAN)
            );
        }
        text.push_str("\nparameter\tvalue_norm\tnon_finite\tgrad_norm\n");
        for (i, p) in self.model.params().iter().enumerate() {
            let d = p.value.data();
            let norm = d.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            let bad = d.iter().filter(|v| !v.is_finite()).count();
            let g = grads.map(|g| global_norm(std::slice::from_ref(&g[i])));
            let _ = writeln!(text, "{}\t{norm}\t{bad}\t{}", p.name, opt(g));
        }
        let path = self.config.output_dir.join(format!("diagnostics-step{step}.txt"));
        match fs::create_dir_all(&self.config.output_dir).and_then(|_| fs::write(&path, &text)) {
            Ok(()) => path.display().to_string(),
            Err(e) => {
                log::error!("cannot write diagnostics to {}: {e}\n{text}", path.display());
                "the log".into()
            }
        }
    }

    /// Greedy transcripts for every sample, batched by `batch_size`.
    pub fn transcribe(&self, dataset: &Dataset) -> Result<Vec<String>> {
        let model = &self.model;
        let chunks: Vec<&[Sample]> = dataset.samples().chunks(self.config.batch_size).collect();
        let out: Vec<Vec<String>> = self.pool.install(|| {
            chunks
                .par_iter()
                .map(|chunk| {
                    let images: Vec<_> = chunk.iter().map(|s| &s.image).collect();
                    let batch = ImageBatch::from_images(&images, model.config().input_height)?;
                    Ok(model
                        .infer(&batch)?
                        .iter()
                        .map(|l| greedy_decode(l, &model.config().vocab))
                        .collect())
                })
                .collect::<Result<_>>()
        })?;
        Ok(out.into_iter().flatten().collect())
    }

    pub fn evaluate(&self, dataset: &Dataset) -> Result<EvalReport> {
        let hyps = self.transcribe(dataset)?;
        let ids: Vec<&str> = dataset.samples().iter().map(|s| s.id.as_str()).collect();
        let refs: Vec<&str> = dataset.samples().iter().map(|s| s.transcript.as_str()).collect();
        let hyps: Vec<&str> = hyps.iter().map(String::as_str).collect();
        EvalReport::compute(&ids, &refs, &hyps, false)
    }

    fn metrics_row(&mut self, wall_time: f64) -> Result<MetricsRow> {
        let p = &mut self.progress;
        let train_loss = (p.pending_loss_count > 0).then(|| p.pending_loss_sum / p.pending_loss_count as f64);
        p.pending_loss_sum = 0.0;
        p.pending_loss_count = 0;
        let val = self.val.as_ref().map(|v| self.evaluate(v)).transpose()?;
        let train_cer = if self.config.train_eval_samples > 0 {
            Some(self.evaluate(&self.train.head(self.config.train_eval_samples))?.cer)
        } else {
            None
        };
        Ok(MetricsRow {
            step: self.progress.step,
            train_loss,
            val_cer: val.as_ref().map(|r| r.cer),
            val_wer: val.as_ref().map(|r| r.wer),
            wall_time: if self.config.record_wall_time { wall_time } else { 0.0 },
            train_cer,
        })
    }

    /// Runs to `max_steps`/`max_epochs` or early stop, writing metrics,
    /// checkpoints and state under `output_dir`. Setting `stop` saves the
    /// state and returns with `interrupted`.
    pub fn fit(&mut self, stop: Option<&AtomicBool>) -> Result<FitReport> {
        self.fit_until(|_| stop.is_some_and(|s| s.load(Ordering::SeqCst)))
    }

    /// [`Trainer::fit`] with an interrupt predicate checked before each step,
    /// given the number of steps completed.
    pub fn fit_until(&mut self, should_stop: impl Fn(u64) -> bool) -> Result<FitReport> {
        let dir = self.config.output_dir.clone();
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        let cfg_path = dir.join(CONFIG_COPY);
        fs::write(&cfg_path, self.config.to_toml()).map_err(io_at(&cfg_path))?;
        let metrics_path = dir.join(METRICS_FILE);
        let best = dir.join(BEST_CHECKPOINT);
        let last = dir.join(LAST_CHECKPOINT);
        let state_path = dir.join(STATE_FILE);

        let mut history = Vec::new();
        if self.progress.step > 0 && metrics_path.exists() {
            let text = fs::read_to_string(&metrics_path).map_err(io_at(&metrics_path))?;
            history = parse_metrics_csv(&text)?;
            history.retain(|r| r.step <= self.progress.step);
        }
        let mut csv = String::from(METRICS_HEADER);
        csv.push('\n');
        for r in &history {
            csv.push_str(&r.csv_line());
            csv.push('\n');
        }
        fs::write(&metrics_path, csv).map_err(io_at(&metrics_path))?;
        let mut metrics = fs::OpenOptions::new()
            .append(true)
            .open(&metrics_path)
            .map_err(io_at(&metrics_path))?;

        let started = Instant::now();
        let base_elapsed = self.progress.elapsed_secs;
        let elapsed = |t: &Instant| base_elapsed + t.elapsed().as_secs_f64();
        let mut interrupted = false;
        let mut stopped_early = false;
        while self.progress.step < self.total_steps {
            if should_stop(self.progress.step) {
                interrupted = true;
                break;
            }
            let report = self.train_step()?;
            log::debug!(
                "step {} loss {} grad_norm {:.4} lr {:.2e}",
                report.step + 1,
                opt(report.loss),
                report.grad_norm,
                report.lr
            );
            let step = self.progress.step;
            if !step.is_multiple_of(self.config.eval_interval) && step != self.total_steps {
                continue;
            }
            let row = self.metrics_row(elapsed(&started))?;
            writeln!(metrics, "{}", row.csv_line()).map_err(io_at(&metrics_path))?;
            log::info!(
                "step {step}: loss {} val_cer {} val_wer {} train_cer {}",
                opt(row.train_loss),
                opt(row.val_cer),
                opt(row.val_wer),
                opt(row.train_cer)
            );
            let monitored = row.val_cer.or(row.train_cer);
            if let Some(cer) = monitored {
                if self.progress.best_cer.is_none_or(|b| cer < b) {
                    self.progress.best_cer = Some(cer);
                    save_checkpoint(&self.model, &best)?;
                }
            }
            save_checkpoint(&self.model, &last)?;
            self.progress.elapsed_secs = elapsed(&started);
            self.save_state(&state_path)?;
            history.push(row);
            if let (Some(cer), Some(target)) = (monitored, self.config.early_stop_cer) {
                if cer < target {
                    stopped_early = true;
                    break;
                }
            }
        }
        self.progress.elapsed_secs = elapsed(&started);
        self.save_state(&state_path)?;
        if !last.exists() {
            save_checkpoint(&self.model, &last)?;
        }
        if !best.exists() {
            fs::copy(&last, &best).map_err(io_at(&best))?;
        }
        Ok(FitReport {
            history,
            steps: self.progress.step,
            best_cer: self.progress.best_cer,
            skipped_samples: self.progress.skipped_samples,
            interrupted,
            stopped_early,
            best_checkpoint: best,
            last_checkpoint: last,
            state_file: state_path,
        })
    }
}

fn build_pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Greedy transcripts for images of any height, `batch_size` at a time.
pub fn transcribe_batched(model: &EasterModel<f32>, images: &[GrayImage], batch_size: usize) -> Result<Vec<String>> {
    let height = model.config().input_height;
    let chunks: Vec<&[GrayImage]> = images.chunks(batch_size.max(1)).collect();
    let out: Vec<Vec<String>> = chunks
        .par_iter()
        .map(|chunk| {
            let fitted: Vec<GrayImage> = chunk.iter().map(|i| fit_height(i.clone(), height)).collect();
            model.transcribe(&fitted)
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Scores `model` on every manifest entry. References may contain
/// characters outside the model vocabulary; they count as errors.
pub fn evaluate_manifest(
    model: &EasterModel<f32>,
    manifest: &Manifest,
    batch_size: usize,
    case_fold: bool,
) -> Result<EvalReport> {
    let images = manifest
        .entries()
        .par_iter()
        .map(|e| GrayImage::load(&manifest.resolve(e)))
        .collect::<Result<Vec<_>>>()?;
    let hyps = transcribe_batched(model, &images, batch_size)?;
    let ids: Vec<String> = manifest.entries().iter().map(|e| e.path.to_string_lossy().into_owned()).collect();
    let refs: Vec<&str> = manifest.entries().iter().map(|e| e.transcript.as_str()).collect();
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    let hyps: Vec<&str> = hyps.iter().map(String::as_str).collect();
    EvalReport::compute(&ids, &refs, &hyps, case_fold)
}

/// Loads data, trains and returns the report.
pub fn fit(config: TrainingConfig) -> Result<FitReport> {
    Trainer::new(config)?.fit(None)
}

/// Fresh model for a config, initialized exactly as [`Trainer`] would.
pub fn initial_model(config: &TrainingConfig) -> Result<EasterModel<f32>> {
    let cfg: ModelConfig = config.model.resolve();
    EasterModel::build(cfg, &mut substream_rng(config.seed, 0, SALT_INIT))
}
