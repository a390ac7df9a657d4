use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use easter_core::augment::AugmentPipeline;
use easter_core::datagen::{generate_dataset, GeneratorConfig, Manifest};
use easter_core::model::{load_checkpoint, ModelConfig};
use easter_core::trainer::{
    evaluate_manifest, parse_metrics_csv, transcribe_batched, TrainState, Trainer, TrainingConfig,
    STATE_FILE,
};
use easter_core::{EasterModel, GrayImage, Preset, Vocabulary};

use crate::plot::{render_svg, Run};
use crate::{
    AugmentPreviewArgs, CliError, CliResult, EvalArgs, ExportPlotArgs, GenDataArgs, InspectArgs,
    TemplatePreset, TrainArgs, TranscribeArgs,
};

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn read_config_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))
}

fn config_error(path: &Path, e: easter_core::Error) -> CliError {
    match e {
        easter_core::Error::File { .. } => usage(e),
        _ => usage(format!("{}: {e}", path.display())),
    }
}

fn parse_training_config(path: &Path) -> CliResult<TrainingConfig> {
    TrainingConfig::load(path).map_err(|e| config_error(path, e))
}

fn load_training_config(path: &Path) -> CliResult<TrainingConfig> {
    let cfg = parse_training_config(path)?;
    cfg.validate().map_err(|e| config_error(path, e))?;
    Ok(cfg)
}

pub fn gen_data(a: GenDataArgs) -> CliResult {
    let mut cfg = match (&a.config, a.preset) {
        (Some(path), _) => {
            GeneratorConfig::from_toml(&read_config_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(TemplatePreset::Document)) => GeneratorConfig::default(),
        (None, Some(TemplatePreset::Alphanumeric)) => GeneratorConfig::alphanumeric(1000, 0),
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(size) = a.size {
        cfg.size = size;
    }
    cfg.validate().map_err(usage)?;
    let out = a
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| usage("--out is required when the config has no output_dir"))?;
    let manifest = generate_dataset(&cfg, &out)?;
    eprintln!("wrote {} samples to {}", manifest.len(), out.display());
    Ok(())
}

fn load_pipeline(path: &Path) -> CliResult<AugmentPipeline> {
    let text = read_config_text(path)?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let pipeline = if table.contains_key("augment") {
        TrainingConfig::from_toml(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?
            .augment
            .resolve()
    } else {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    pipeline.validate().map_err(usage)?;
    Ok(pipeline)
}

pub fn augment_preview(a: AugmentPreviewArgs) -> CliResult {
    let pipeline = match &a.config {
        Some(p) => load_pipeline(p)?,
        None => AugmentPipeline::standard(),
    };
    let image = GrayImage::load(&a.input)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    image.save_pgm(&a.out.join("original.pgm"))?;
    for i in 0..a.count {
        let seed = a.seed.wrapping_add(i as u64);
        let path = a.out.join(format!("preview_{i:03}.pgm"));
        pipeline.apply(&image, seed).save_pgm(&path)?;
        println!("{}\t{}", path.display(), pipeline.fired(&image, seed).join(","));
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult {
    let cfg = load_training_config(&a.config)?;
    let mut trainer = Trainer::new(cfg.clone())?;
    if let Some(resume) = a.resume {
        let path = resume.unwrap_or_else(|| cfg.output_dir.join(STATE_FILE));
        trainer.restore(TrainState::load(&path)?)?;
        eprintln!("resuming {} at step {}", path.display(), trainer.progress().step);
    }

    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    ctrlc::set_handler(move || {
        if flag.swap(true, Ordering::SeqCst) {
            std::process::exit(1);
        }
        eprintln!("interrupt received; saving state after the current step (press again to abort)");
    })
    .context("installing interrupt handler")?;

    let report = trainer.fit(Some(&stop))?;
    if report.interrupted {
        return Err(CliError::Runtime(anyhow!(
            "interrupted after step {}; state saved to {}; continue with `easter train --config {} --resume`",
            report.steps,
            report.state_file.display(),
            a.config.display()
        )));
    }
    eprintln!(
        "finished {} steps{}; best CER {}; skipped samples {}",
        report.steps,
        if report.stopped_early { " (early stop)" } else { "" },
        report.best_cer.map_or("n/a".into(), |c| format!("{c:.4}")),
        report.skipped_samples
    );
    eprintln!("best checkpoint: {}", report.best_checkpoint.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult {
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let model = load_checkpoint(&a.checkpoint)?;
    let manifest = Manifest::load(&a.manifest)?;
    let report = evaluate_manifest(&model, &manifest, a.batch_size, a.case_fold)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    fs::write(a.out.join("summary.json"), report.summary_json() + "\n").context("writing summary.json")?;
    fs::write(a.out.join("records.tsv"), report.records_tsv()).context("writing records.tsv")?;
    println!("{}", report.summary_json());
    eprintln!(
        "CER {:.4}  WER {:.4}  word accuracy {:.4}  exact match {:.4}  ({} samples)",
        report.cer, report.wer, report.word_accuracy, report.exact_match, report.samples
    );
    Ok(())
}

fn list_inputs(input: &Path) -> CliResult<Vec<PathBuf>> {
    if input.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(input).with_context(|| format!("listing {}", input.display()))? {
            let path = entry.context("reading directory entry")?.path();
            if path.is_file() {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    } else if input.is_file() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(CliError::Runtime(anyhow!("{} does not exist", input.display())))
    }
}

pub fn transcribe(a: TranscribeArgs) -> CliResult {
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let model = load_checkpoint(&a.checkpoint)?;
    let files = list_inputs(&a.input)?;
    let mut paths = Vec::new();
    let mut images = Vec::new();
    let mut failures = 0;
    for path in &files {
        match GrayImage::load(path) {
            Ok(img) => {
                paths.push(path);
                images.push(img);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}\terror: {e}", path.display());
            }
        }
    }
    let texts = transcribe_batched(&model, &images, a.batch_size)?;
    for (path, text) in paths.iter().zip(&texts) {
        println!("{}\t{text}", path.display());
    }
    if failures > 0 {
        return Err(CliError::Runtime(anyhow!("{failures} of {} inputs could not be read", files.len())));
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> CliResult {
    let (cfg, params) = if let Some(path) = &a.checkpoint {
        let model = load_checkpoint(path)?;
        let n = model.param_count();
        (model.config().clone(), n)
    } else {
        let cfg = if let Some(path) = &a.config {
            parse_training_config(path)?.model.resolve()
        } else {
            let name = a.preset.as_deref().expect("clap requires one model source");
            let preset = Preset::from_str(name).map_err(usage)?;
            let vocab = match &a.vocab {
                Some(v) => Vocabulary::new(v.chars()).map_err(usage)?,
                None => Vocabulary::alphanumeric(),
            };
            ModelConfig::preset(preset, vocab)
        };
        cfg.validate().map_err(usage)?;
        let n = EasterModel::<f32>::zeroed(cfg.clone())?.param_count();
        (cfg, n)
    };
    eprint!("{}", cfg.architecture_table());
    eprintln!(
        "{} layers, {} trainable parameters, vocabulary of {} characters plus blank",
        cfg.total_sub_blocks(),
        params,
        cfg.vocab.len()
    );
    print!("{}", cfg.architecture_tsv());
    println!();
    println!("layers\t{}", cfg.total_sub_blocks());
    println!("parameters\t{params}");
    println!("vocabulary\t{}", cfg.vocab.len());
    Ok(())
}

pub fn export_plot(a: ExportPlotArgs) -> CliResult {
    if !a.label.is_empty() && a.label.len() != a.metrics.len() {
        return Err(usage("give one --label per --metrics file, or none"));
    }
    let mut runs = Vec::with_capacity(a.metrics.len());
    for (i, path) in a.metrics.iter().enumerate() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let rows = parse_metrics_csv(&text).with_context(|| path.display().to_string())?;
        if rows.is_empty() {
            return Err(CliError::Runtime(anyhow!("{} has no data rows", path.display())));
        }
        let label = a.label.get(i).cloned().unwrap_or_else(|| default_label(path));
        runs.push(Run { label, rows });
    }
    fs::write(&a.out, render_svg(&runs)).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn default_label(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
