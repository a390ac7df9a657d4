use serde::{Deserialize, Serialize};

use crate::ctc::Vocabulary;
use crate::error::{Error, Result};

/// One row of an architecture table: a stack of identical sub-blocks.
///
/// `stride` applies to the first sub-block only; `dilation` to all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub sub_blocks: usize,
    pub kernel: usize,
    pub filters: usize,
    pub dropout: f32,
    pub dilation: usize,
    pub stride: usize,
    #[serde(default)]
    pub residual: bool,
}

impl BlockSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        sub_blocks: usize,
        kernel: usize,
        filters: usize,
        dropout: f32,
        dilation: usize,
        stride: usize,
        residual: bool,
    ) -> Self {
        Self {
            name: name.to_string(),
            sub_blocks,
            kernel,
            filters,
            dropout,
            dilation,
            stride,
            residual,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Config(format!("block {}: {what}", self.name)));
        if self.sub_blocks == 0 {
            return fail("sub_blocks must be >= 1");
        }
        if self.kernel == 0 {
            return fail("kernel must be >= 1");
        }
        if self.filters == 0 {
            return fail("filters must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if self.dilation == 0 {
            return fail("dilation must be >= 1");
        }
        if self.stride == 0 {
            return fail("stride must be >= 1");
        }
        Ok(())
    }
}

/// Named architecture presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// The reference 14-layer model.
    #[serde(rename = "3x3")]
    Easter3x3,
    /// 20-layer residual variant. The layer schedule is a reconstruction.
    #[serde(rename = "5x3")]
    Easter5x3,
    /// 3x3 layout with every filter count halved. Also a reconstruction.
    Small,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3x3" => Ok(Preset::Easter3x3),
            "5x3" => Ok(Preset::Easter5x3),
            "small" => Ok(Preset::Small),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected 3x3, 5x3 or small)"
            ))),
        }
    }
}

/// Input height plus the ordered block list: one preprocessing block, the
/// body, and three postprocessing blocks, the last of which projects onto
/// the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_height: usize,
    pub vocab: Vocabulary,
    pub blocks: Vec<BlockSpec>,
}

pub const DEFAULT_INPUT_HEIGHT: usize = 40;

impl ModelConfig {
    pub fn easter_3x3(vocab: Vocabulary) -> Self {
        let classes = vocab.num_classes();
        Self {
            input_height: DEFAULT_INPUT_HEIGHT,
            vocab,
            blocks: vec![
                BlockSpec::new("Preprocess-I", 2, 3, 64, 0.2, 1, 2, false),
                BlockSpec::new("B1", 3, 3, 128, 0.2, 1, 1, false),
                BlockSpec::new("B2", 3, 4, 128, 0.3, 1, 1, false),
                BlockSpec::new("B3", 3, 6, 128, 0.3, 1, 1, false),
                BlockSpec::new("Postprocess-I", 1, 7, 256, 0.4, 2, 1, false),
                BlockSpec::new("Postprocess-II", 1, 1, 512, 0.4, 1, 1, false),
                BlockSpec::new("Postprocess-III", 1, 1, classes, 0.0, 1, 1, false),
            ],
        }
    }

    pub fn easter_5x3(vocab: Vocabulary) -> Self {
        let classes = vocab.num_classes();
        let mut blocks = vec![BlockSpec::new("Preprocess-I", 2, 3, 128, 0.2, 1, 2, false)];
        let body = [(3, 128, 0.2), (4, 128, 0.3), (5, 256, 0.3), (6, 256, 0.3), (7, 512, 0.3)];
        for (i, &(kernel, filters, dropout)) in body.iter().enumerate() {
            blocks.push(BlockSpec::new(&format!("B{}", i + 1), 3, kernel, filters, dropout, 1, 1, true));
        }
        blocks.extend([
            BlockSpec::new("Postprocess-I", 1, 7, 512, 0.4, 2, 1, false),
            BlockSpec::new("Postprocess-II", 1, 1, 1024, 0.4, 1, 1, false),
            BlockSpec::new("Postprocess-III", 1, 1, classes, 0.0, 1, 1, false),
        ]);
        Self {
            input_height: DEFAULT_INPUT_HEIGHT,
            vocab,
            blocks,
        }
    }

    pub fn easter_small(vocab: Vocabulary) -> Self {
        let mut cfg = Self::easter_3x3(vocab);
        let last = cfg.blocks.len() - 1;
        for block in &mut cfg.blocks[..last] {
            block.filters /= 2;
        }
        cfg
    }

    pub fn preset(preset: Preset, vocab: Vocabulary) -> Self {
        match preset {
            Preset::Easter3x3 => Self::easter_3x3(vocab),
            Preset::Easter5x3 => Self::easter_5x3(vocab),
            Preset::Small => Self::easter_small(vocab),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_height == 0 {
            return Err(Error::Config("input_height must be >= 1".into()));
        }
        if self.blocks.len() < 4 {
            return Err(Error::Config(format!(
                "need one preprocessing and three postprocessing blocks, got {} blocks",
                self.blocks.len()
            )));
        }
        for block in &self.blocks {
            block.validate()?;
        }
        let last = self.blocks.last().expect("non-empty");
        if last.filters != self.vocab.num_classes() {
            return Err(Error::Config(format!(
                "final block has {} filters but the vocabulary needs {} (|vocab| + blank)",
                last.filters,
                self.vocab.num_classes()
            )));
        }
        Ok(())
    }

    pub fn total_sub_blocks(&self) -> usize {
        self.blocks.iter().map(|b| b.sub_blocks).sum()
    }

    /// Overall time downsampling factor.
    pub fn total_stride(&self) -> usize {
        self.blocks.iter().map(|b| b.stride).product()
    }

    /// Lattice frames produced for an input of `width` columns.
    pub fn output_length(&self, width: usize) -> usize {
        self.blocks
            .iter()
            .fold(width, |len, b| crate::tensor::conv_output_len(len, b.stride))
    }

    /// Human-readable table with one row per block.
    pub fn architecture_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>10} {:>6} {:>10} {:>7} {:>8} {:>6} {:>8}\n",
            "Block", "Sub-Blocks", "Kernel", "Filters", "Dropout", "Dilation", "Stride", "Residual"
        );
        let last = self.blocks.len() - 1;
        for (i, b) in self.blocks.iter().enumerate() {
            let filters = if i == last {
                format!("{} (V+1)", b.filters)
            } else {
                b.filters.to_string()
            };
            out.push_str(&format!(
                "{:<16} {:>10} {:>6} {:>10} {:>7} {:>8} {:>6} {:>8}\n",
                b.name,
                b.sub_blocks,
                b.kernel,
                filters,
                b.dropout,
                b.dilation,
                b.stride,
                if b.residual { "yes" } else { "no" }
            ));
        }
        out
    }

    /// Tab-separated architecture rows with a header line.
    pub fn architecture_tsv(&self) -> String {
        let mut out = String::from("block\tsub_blocks\tkernel\tfilters\tdropout\tdilation\tstride\tresidual\n");
        for b in &self.blocks {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                b.name, b.sub_blocks, b.kernel, b.filters, b.dropout, b.dilation, b.stride, b.residual
            ));
        }
        out
    }
}
