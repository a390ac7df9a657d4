//! Seeded synthetic machine-printed text images.
//!
//! A [`GeneratorConfig`] holds weighted [`PatternTemplate`]s and style
//! probabilities. Sample `i` of a dataset draws all its randomness from
//! `stream_rng(seed, i)`, so any sharding of the index range reproduces the
//! same bytes.

mod manifest;
mod pattern;
mod render;

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{Manifest, ManifestEntry};
pub use pattern::Pattern;
pub use render::{render, rendered_width, Glyph, GlyphAtlas, TextStyle};

use crate::ctc::Vocabulary;
use crate::error::{io_at, Error, Result};
use crate::raster::GrayImage;
use crate::rng::stream_rng;

pub const DEFAULT_HEIGHT: usize = 40;
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTemplate {
    pub name: String,
    pub pattern: String,
    pub weight: f64,
}

impl PatternTemplate {
    pub fn new(name: &str, pattern: &str, weight: f64) -> Self {
        Self {
            name: name.to_string(),
            pattern: pattern.to_string(),
            weight,
        }
    }
}

/// Names, street addresses, dollar amounts, phone numbers and e-mail addresses.
pub fn document_templates() -> Vec<PatternTemplate> {
    vec![
        PatternTemplate::new("name", "<first> <last>", 0.25),
        PatternTemplate::new("address", r"\d{1,4} <street> <suffix>", 0.2),
        PatternTemplate::new("dollars", r"$(\d{1,3}|\d{1,3},\d{3}).\d{2}", 0.2),
        PatternTemplate::new("phone", r"(\(\d{3}\) |)\d{3}-\d{4}", 0.15),
        PatternTemplate::new("email", r"\l{3,8}.\l{3,8}@<domain>", 0.2),
    ]
}

/// Short digit and letter strings over the alphanumeric vocabulary.
pub fn alphanumeric_templates() -> Vec<PatternTemplate> {
    vec![
        PatternTemplate::new("digits", r"\d{2,6}", 0.4),
        PatternTemplate::new("word", r"\w{2,6}", 0.6),
    ]
}

/// Probabilities and ranges of per-image style variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleConfig {
    pub bold: f64,
    pub italic: f64,
    pub underline: f64,
    pub spacing: [usize; 2],
    pub ink: [u8; 2],
    pub paper: [u8; 2],
    pub top: [usize; 2],
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            bold: 0.2,
            italic: 0.2,
            underline: 0.1,
            spacing: [1, 3],
            ink: [0, 60],
            paper: [200, 255],
            top: [2, 6],
        }
    }
}

impl StyleConfig {
    /// Every image in the default plain style.
    pub fn plain() -> Self {
        let s = TextStyle::default();
        Self {
            bold: 0.0,
            italic: 0.0,
            underline: 0.0,
            spacing: [s.spacing; 2],
            ink: [s.ink; 2],
            paper: [s.paper; 2],
            top: [s.top; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("bold", self.bold), ("italic", self.italic), ("underline", self.underline)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("style.{name} probability {p} outside [0, 1]")));
            }
        }
        let ordered = self.spacing[0] <= self.spacing[1]
            && self.ink[0] <= self.ink[1]
            && self.paper[0] <= self.paper[1]
            && self.top[0] <= self.top[1];
        if !ordered {
            return Err(Error::Config("style range with minimum above maximum".into()));
        }
        if self.ink[1] >= self.paper[0] {
            return Err(Error::Config("style ink range must be darker than paper range".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TextStyle {
        TextStyle {
            bold: rng.random_bool(self.bold),
            italic: rng.random_bool(self.italic),
            underline: rng.random_bool(self.underline),
            spacing: rng.random_range(self.spacing[0]..=self.spacing[1]),
            ink: rng.random_range(self.ink[0]..=self.ink[1]),
            paper: rng.random_range(self.paper[0]..=self.paper[1]),
            top: rng.random_range(self.top[0]..=self.top[1]),
        }
    }
}

/// Compiled templates with their sampling distribution.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    names: Vec<String>,
    patterns: Vec<Pattern>,
    dist: WeightedIndex<f64>,
}

impl TemplateSet {
    /// Compiles `templates`, checking weights and that every producible character is in `vocab`.
    pub fn new(templates: &[PatternTemplate], vocab: &Vocabulary) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Config("at least one template is required".into()));
        }
        let total: f64 = templates.iter().map(|t| t.weight).sum();
        if templates.iter().any(|t| !(t.weight >= 0.0)) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "template weights must be non-negative and sum to 1 (sum is {total})"
            )));
        }
        let mut patterns = Vec::with_capacity(templates.len());
        for t in templates {
            let p = Pattern::parse(&t.pattern)?;
            if let Some(c) = p.alphabet().into_iter().find(|&c| !vocab.contains(c)) {
                return Err(Error::Config(format!(
                    "template {:?} can produce {c:?}, which is not in the vocabulary",
                    t.name
                )));
            }
            if p.min_len() == 0 {
                return Err(Error::Config(format!("template {:?} can produce empty text", t.name)));
            }
            patterns.push(p);
        }
        let dist = WeightedIndex::new(templates.iter().map(|t| t.weight))
            .map_err(|e| Error::Config(format!("template weights: {e}")))?;
        Ok(Self {
            names: templates.iter().map(|t| t.name.clone()).collect(),
            patterns,
            dist,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn pattern(&self, i: usize) -> &Pattern {
        &self.patterns[i]
    }

    /// Draws a template index, then a string from its grammar.
    pub fn sample_indexed<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, String) {
        let i = self.dist.sample(rng);
        (i, self.patterns[i].sample(rng))
    }
}

/// Draws one transcript from the weighted templates.
pub fn sample_text<R: Rng + ?Sized>(templates: &TemplateSet, rng: &mut R) -> String {
    templates.sample_indexed(rng).1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub size: usize,
    pub seed: u64,
    pub height: usize,
    pub vocabulary: Vocabulary,
    pub output_dir: Option<PathBuf>,
    pub style: StyleConfig,
    pub templates: Vec<PatternTemplate>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            size: 1000,
            seed: 0,
            height: DEFAULT_HEIGHT,
            vocabulary: Vocabulary::printed(),
            output_dir: None,
            style: StyleConfig::default(),
            templates: document_templates(),
        }
    }
}

impl GeneratorConfig {
    /// Digit/letter strings over the 62-character alphanumeric vocabulary.
    pub fn alphanumeric(size: usize, seed: u64) -> Self {
        Self {
            size,
            seed,
            vocabulary: Vocabulary::alphanumeric(),
            templates: alphanumeric_templates(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_at(path))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("size must be at least 1".into()));
        }
        self.style.validate()?;
        TemplateSet::new(&self.templates, &self.vocabulary)?;
        Ok(())
    }
}

/// Stateless per-index sample generator.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    templates: TemplateSet,
    atlas: GlyphAtlas,
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let templates = TemplateSet::new(&config.templates, &config.vocabulary)?;
        let atlas = GlyphAtlas::for_vocabulary(&config.vocabulary)?;
        Ok(Self {
            config,
            templates,
            atlas,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn atlas(&self) -> &GlyphAtlas {
        &self.atlas
    }

    /// Transcript and image of sample `index`.
    pub fn sample(&self, index: u64) -> Result<(String, GrayImage)> {
        let mut rng = stream_rng(self.config.seed, index);
        let text = sample_text(&self.templates, &mut rng);
        let style = self.config.style.sample(&mut rng);
        let image = render(&text, &self.atlas, &style, self.config.height)?;
        Ok((text, image))
    }

    /// Samples `range` in parallel, in index order.
    pub fn samples(&self, range: std::ops::Range<u64>) -> Result<Vec<(String, GrayImage)>> {
        range.into_par_iter().map(|i| self.sample(i)).collect()
    }
}

/// Writes `images/NNNNNN.pgm`, `manifest.tsv` and `generator.toml` under `out_dir`.
pub fn generate_dataset(config: &GeneratorConfig, out_dir: &Path) -> Result<Manifest> {
    let generator = Generator::new(config.clone())?;
    let image_dir = out_dir.join(IMAGE_DIR);
    fs::create_dir_all(&image_dir).map_err(io_at(&image_dir))?;
    let entries = (0..config.size as u64)
        .into_par_iter()
        .map(|i| {
            let (transcript, image) = generator.sample(i)?;
            let rel = PathBuf::from(IMAGE_DIR).join(format!("{i:06}.pgm"));
            image.save_pgm(&out_dir.join(&rel))?;
            Ok(ManifestEntry {
                path: rel,
                transcript,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest::new(out_dir, entries);
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    let cfg_path = out_dir.join("generator.toml");
    fs::write(&cfg_path, config.to_toml()).map_err(io_at(&cfg_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn single_literal_template() {
        let set = TemplateSet::new(&[PatternTemplate::new("x", "abc", 1.0)], &Vocabulary::alphanumeric()).unwrap();
        assert_eq!(sample_text(&set, &mut stream_rng(0, 0)), "abc");
    }

    #[test]
    fn weighted_frequencies() {
        let set = TemplateSet::new(
            &[PatternTemplate::new("a", "a", 0.7), PatternTemplate::new("b", "b", 0.3)],
            &Vocabulary::alphanumeric(),
        )
        .unwrap();
        let mut rng = stream_rng(3, 0);
        let n = 10_000;
        let a = (0..n).filter(|_| sample_text(&set, &mut rng) == "a").count();
        assert!((a as f64 / n as f64 - 0.7).abs() < 0.02);
    }

    #[test]
    fn rejects_out_of_vocabulary_template() {
        let err = TemplateSet::new(&[PatternTemplate::new("d", r"$\d", 1.0)], &Vocabulary::alphanumeric());
        assert!(matches!(err, Err(Error::Config(m)) if m.contains("'$'")));
    }

    #[test]
    fn rejects_bad_weights() {
        let v = Vocabulary::alphanumeric();
        assert!(TemplateSet::new(&[PatternTemplate::new("a", "a", 0.5)], &v).is_err());
        assert!(TemplateSet::new(&[], &v).is_err());
        assert!(TemplateSet::new(
            &[PatternTemplate::new("a", "a", 1.5), PatternTemplate::new("b", "b", -0.5)],
            &v
        )
        .is_err());
    }

    #[test]
    fn default_configs_validate() {
        GeneratorConfig::default().validate().unwrap();
        GeneratorConfig::alphanumeric(10, 1).validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = GeneratorConfig {
            output_dir: Some("out".into()),
            ..GeneratorConfig::default()
        };
        assert_eq!(GeneratorConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn toml_rejects_bad_probability() {
        let text = "size = 5\n[style]\nbold = 1.5\n";
        assert!(GeneratorConfig::from_toml(text).is_err());
        assert!(GeneratorConfig::from_toml("size = 0\n").is_err());
    }

    #[test]
    fn samples_are_index_deterministic() {
        let g = Generator::new(GeneratorConfig::default()).unwrap();
        let all = g.samples(0..6).unwrap();
        let tail = g.samples(3..6).unwrap();
        assert_eq!(&all[3..], &tail[..]);
        for (_, img) in &all {
            assert_eq!(img.height(), DEFAULT_HEIGHT);
        }
    }
}
