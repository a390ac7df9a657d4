//! Connectionist temporal classification: vocabulary, the collapse map,
//! forward-backward loss (plain and class-weighted), and greedy decoding.
//!
//! The blank symbol is always the last class, so a vocabulary of `n`
//! characters produces lattices with `n + 1` classes.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Ordered character set. Class `i < len()` is `chars[i]`; class `len()` is blank.
#[derive(Clone, PartialEq, Eq)]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let chars: Vec<char> = chars.into_iter().collect();
        if chars.is_empty() {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if c.is_control() {
                return Err(Error::Config(format!("vocabulary contains control character {c:?}")));
            }
            if index.insert(c, i).is_some() {
                return Err(Error::Config(format!("vocabulary repeats {c:?}")));
            }
        }
        Ok(Self { chars, index })
    }

    /// Digits, lower-case and upper-case ASCII letters (62 characters).
    pub fn alphanumeric() -> Self {
        Self::new(('0'..='9').chain('a'..='z').chain('A'..='Z')).expect("unique")
    }

    /// Alphanumerics plus the punctuation used by the shipped text templates.
    pub fn printed() -> Self {
        Self::new(
            ('0'..='9')
                .chain('a'..='z')
                .chain('A'..='Z')
                .chain(" .,-$@#/:()'&".chars()),
        )
        .expect("unique")
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn blank_index(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, class: usize) -> Option<char> {
        self.chars.get(class).copied()
    }

    pub fn encode(&self, text: &str) -> Result<LabelSequence> {
        text.chars()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| invalid(format!("character {c:?} is not in the vocabulary")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelSequence)
    }

    /// Maps non-blank classes to characters; blanks and unknown classes are dropped.
    pub fn decode(&self, classes: &[usize]) -> String {
        classes.iter().filter_map(|&c| self.char_at(c)).collect()
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Vocabulary").field(&self.as_string()).finish()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_string())
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Vocabulary::new(s.chars()).map_err(serde::de::Error::custom)
    }
}

/// Target transcript as class indices, blanks excluded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSequence(pub Vec<usize>);

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Fewest frames any alignment needs: one per symbol plus a separating
    /// blank between equal neighbours.
    pub fn min_frames(&self) -> usize {
        let repeats = self.0.windows(2).filter(|w| w[0] == w[1]).count();
        self.0.len() + repeats
    }
}

/// Per-frame log-probabilities over all classes (blank last).
///
/// Only the first `valid_length` frames take part in loss and decoding; the
/// rest is padding left over from batching.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    values: Vec<f64>,
    frames: usize,
    classes: usize,
    valid_length: usize,
}

impl LogProbLattice {
    pub fn new(values: Vec<f64>, frames: usize, classes: usize) -> Result<Self> {
        Self::with_valid_length(values, frames, classes, frames)
    }

    pub fn with_valid_length(
        values: Vec<f64>,
        frames: usize,
        classes: usize,
        valid_length: usize,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(invalid("a lattice needs at least one character class and blank"));
        }
        if values.len() != frames * classes {
            return Err(invalid(format!(
                "lattice of {frames}x{classes} given {} values",
                values.len()
            )));
        }
        if valid_length > frames {
            return Err(invalid(format!(
                "valid length {valid_length} exceeds {frames} frames"
            )));
        }
        Ok(Self {
            values,
            frames,
            classes,
            valid_length,
        })
    }

    /// Builds a lattice from per-frame probabilities (not logs).
    pub fn from_probs(probs: &[f64], frames: usize, classes: usize) -> Result<Self> {
        Self::new(probs.iter().map(|p| p.ln()).collect(), frames, classes)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn valid_length(&self) -> usize {
        self.valid_length
    }

    pub fn blank(&self) -> usize {
        self.classes - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.classes..(t + 1) * self.classes]
    }

    fn at(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.classes + k]
    }
}

/// Blank weighting for class-weighted CTC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedCtcConfig {
    pub alpha: f64,
}

impl WeightedCtcConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("weighted CTC alpha {alpha} outside (0, 1)")));
        }
        Ok(Self { alpha })
    }

    /// `1 - alpha` for blank, `alpha` for every character class.
    pub fn class_weight(&self, class: usize, blank: usize) -> f64 {
        if class == blank {
            1.0 - self.alpha
        } else {
            self.alpha
        }
    }
}

/// Merges runs of equal symbols, then removes blanks.
pub fn collapse(path: &[usize], blank: usize) -> LabelSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    LabelSequence(out)
}

/// Loss value plus its gradient with respect to every lattice entry.
///
/// Gradient entries for padded frames are zero.
#[derive(Debug, Clone)]
pub struct CtcOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_inputs(lattice: &LogProbLattice, label: &LabelSequence) -> Result<()> {
    if lattice.valid_length == 0 {
        return Err(invalid("CTC over an empty lattice"));
    }
    if let Some(&bad) = label.0.iter().find(|&&k| k >= lattice.blank()) {
        return Err(invalid(format!(
            "label class {bad} is not a character class of a {}-class lattice",
            lattice.classes
        )));
    }
    let required = label.min_frames();
    if required > lattice.valid_length {
        return Err(Error::InfeasibleAlignment {
            label_len: label.len(),
            required,
            frames: lattice.valid_length,
        });
    }
    Ok(())
}

/// Posterior occupancy of every (frame, class) pair, in probability space.
struct Alignment {
    log_likelihood: f64,
    /// `valid_length × classes`, rows sum to one.
    occupancy: Vec<f64>,
}

fn align(lattice: &LogProbLattice, label: &LabelSequence) -> Alignment {
    let frames = lattice.valid_length;
    let classes = lattice.classes;
    let blank = lattice.blank();
    let ext: Vec<usize> = std::iter::once(blank)
        .chain(label.0.iter().flat_map(|&k| [k, blank]))
        .collect();
    let states = ext.len();
    let can_skip = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; frames * states];
    alpha[0] = lattice.at(0, ext[0]);
    if states > 1 {
        alpha[1] = lattice.at(0, ext[1]);
    }
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * states);
        let prev = &prev[(t - 1) * states..];
        for s in 0..states {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = acc + lattice.at(t, ext[s]);
        }
    }

    let mut beta = vec![neg; frames * states];
    let last = (frames - 1) * states;
    beta[last + states - 1] = lattice.at(frames - 1, ext[states - 1]);
    if states > 1 {
        beta[last + states - 2] = lattice.at(frames - 1, ext[states - 2]);
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * states);
        let cur = &mut cur[t * states..];
        for s in 0..states {
            let mut acc = next[s];
            if s + 1 < states {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < states && can_skip(s + 2) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = acc + lattice.at(t, ext[s]);
        }
    }

    let tail = &alpha[last..];
    let log_likelihood = if states > 1 {
        log_add(tail[states - 1], tail[states - 2])
    } else {
        tail[0]
    };

    // alpha_t(s) + beta_t(s) counts the frame-t emission twice.
    let mut occupancy = vec![0.0; frames * classes];
    for t in 0..frames {
        let row = &mut occupancy[t * classes..(t + 1) * classes];
        for s in 0..states {
            let a = alpha[t * states + s];
            let b = beta[t * states + s];
            if a == neg || b == neg {
                continue;
            }
            let k = ext[s];
            row[k] += (a + b - lattice.at(t, k) - log_likelihood).exp();
        }
    }
    Alignment {
        log_likelihood,
        occupancy,
    }
}

/// `-log p(label | lattice)` summed over every alignment.
pub fn ctc_loss(lattice: &LogProbLattice, label: &LabelSequence) -> Result<f64> {
    ctc_loss_and_grad(lattice, label).map(|o| o.loss)
}

/// [`ctc_loss`] together with `d loss / d lattice`.
pub fn ctc_loss_and_grad(lattice: &LogProbLattice, label: &LabelSequence) -> Result<CtcOutput> {
    check_inputs(lattice, label)?;
    let al = align(lattice, label);
    let mut grad = vec![0.0; lattice.values.len()];
    for (g, &o) in grad.iter_mut().zip(&al.occupancy) {
        *g = -o;
    }
    Ok(CtcOutput {
        loss: -al.log_likelihood,
        grad,
    })
}

/// Class-weighted CTC.
///
/// The loss is split over (frame, class) pairs in proportion to each pair's
/// posterior occupancy, and every share is scaled by its class weight
/// (`1 - alpha` for blank, `alpha` otherwise). The gradient applies the same
/// weights to the per-class occupancy terms of the plain CTC gradient, with
/// the occupancies held fixed. Uniform weights (`alpha = 0.5`) give exactly
/// half the plain loss and gradient.
pub fn weighted_ctc_loss(
    lattice: &LogProbLattice,
    label: &LabelSequence,
    cfg: &WeightedCtcConfig,
) -> Result<f64> {
    weighted_ctc_loss_and_grad(lattice, label, cfg).map(|o| o.loss)
}

pub fn weighted_ctc_loss_and_grad(
    lattice: &LogProbLattice,
    label: &LabelSequence,
    cfg: &WeightedCtcConfig,
) -> Result<CtcOutput> {
    check_inputs(lattice, label)?;
    let al = align(lattice, label);
    let classes = lattice.classes;
    let blank = lattice.blank();
    let plain = -al.log_likelihood;
    let frames = lattice.valid_length as f64;

    let mut grad = vec![0.0; lattice.values.len()];
    let mut weighted_share = 0.0;
    for (i, &occ) in al.occupancy.iter().enumerate() {
        let w = cfg.class_weight(i % classes, blank);
        weighted_share += w * occ;
        grad[i] = -w * occ;
    }
    Ok(CtcOutput {
        loss: plain * weighted_share / frames,
        grad,
    })
}

/// Per-frame argmax over the valid frames; ties go to the lowest class.
pub fn best_path(lattice: &LogProbLattice) -> Vec<usize> {
    (0..lattice.valid_length)
        .map(|t| {
            let frame = lattice.frame(t);
            let mut best = 0;
            for (k, &v) in frame.iter().enumerate().skip(1) {
                if v > frame[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Best path, collapsed and mapped to characters.
pub fn greedy_decode(lattice: &LogProbLattice, vocab: &Vocabulary) -> String {
    let path = best_path(lattice);
    vocab.decode(collapse(&path, lattice.blank()).indices())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// "1εbbεεa" over vocabulary {1, b, a}, blank = 3.
    fn example_path() -> (Vocabulary, Vec<usize>) {
        let vocab = Vocabulary::new("1ba".chars()).unwrap();
        let e = vocab.blank_index();
        (vocab, vec![0, e, 1, 1, e, e, 2])
    }

    #[test]
    fn collapse_examples() {
        let (vocab, path) = example_path();
        assert_eq!(vocab.decode(collapse(&path, 3).indices()), "1ba");
        assert!(collapse(&[3, 3, 3], 3).is_empty());
        // a=0, blank=1
        assert_eq!(collapse(&[0, 1, 0], 1).0, vec![0, 0]);
        assert_eq!(collapse(&[0, 0], 1).0, vec![0]);
    }

    #[test]
    fn greedy_decodes_argmax_path() {
        let (vocab, path) = example_path();
        let classes = vocab.num_classes();
        let mut values = vec![(0.01f64).ln(); path.len() * classes];
        for (t, &k) in path.iter().enumerate() {
            values[t * classes + k] = (0.97f64).ln();
        }
        let lattice = LogProbLattice::new(values, path.len(), classes).unwrap();
        assert_eq!(greedy_decode(&lattice, &vocab), "1ba");

        let blanks = LogProbLattice::new(
            (0..3).flat_map(|_| [-5.0, -5.0, -5.0, -0.1]).collect(),
            3,
            4,
        )
        .unwrap();
        assert_eq!(greedy_decode(&blanks, &vocab), "");
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let lattice = LogProbLattice::new(vec![-1.0, -1.0, -1.0], 1, 3).unwrap();
        assert_eq!(best_path(&lattice), vec![0]);
    }

    #[test]
    fn single_frame_single_path() {
        let lattice = LogProbLattice::from_probs(&[0.7, 0.3], 1, 2).unwrap();
        let loss = ctc_loss(&lattice, &LabelSequence(vec![0])).unwrap();
        assert!((loss + 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_label_is_all_blank() {
        let probs = [0.2, 0.8, 0.6, 0.4, 0.1, 0.9];
        let lattice = LogProbLattice::from_probs(&probs, 3, 2).unwrap();
        let loss = ctc_loss(&lattice, &LabelSequence::default()).unwrap();
        let expected = -(0.8f64.ln() + 0.4f64.ln() + 0.9f64.ln());
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_empty_inputs() {
        let lattice = LogProbLattice::from_probs(&[0.5, 0.5, 0.5, 0.5], 2, 2).unwrap();
        let err = ctc_loss(&lattice, &LabelSequence(vec![0, 0])).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAlignment { required: 3, .. }));
        let padded = LogProbLattice::with_valid_length(vec![0.0; 4], 2, 2, 0).unwrap();
        assert!(matches!(
            ctc_loss(&padded, &LabelSequence::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn padded_frames_are_ignored() {
        let lattice = LogProbLattice::from_probs(&[0.7, 0.3], 1, 2).unwrap();
        let mut values = lattice.values().to_vec();
        values.extend([0.0f64.ln(), 0.0]);
        let padded = LogProbLattice::with_valid_length(values, 2, 2, 1).unwrap();
        let label = LabelSequence(vec![0]);
        let a = ctc_loss_and_grad(&lattice, &label).unwrap();
        let b = ctc_loss_and_grad(&padded, &label).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(&b.grad[2..], &[0.0, 0.0]);
    }

    #[test]
    fn weighted_empty_label_scales_blank_terms() {
        let probs = [0.2, 0.8, 0.6, 0.4];
        let lattice = LogProbLattice::from_probs(&probs, 2, 2).unwrap();
        let empty = LabelSequence::default();
        let cfg = WeightedCtcConfig::new(0.9).unwrap();
        let w = weighted_ctc_loss(&lattice, &empty, &cfg).unwrap();
        let plain = ctc_loss(&lattice, &empty).unwrap();
        assert!((w - 0.1 * plain).abs() < 1e-12);
    }

    #[test]
    fn alpha_must_be_open_interval() {
        assert!(WeightedCtcConfig::new(0.0).is_err());
        assert!(WeightedCtcConfig::new(1.0).is_err());
        assert!(WeightedCtcConfig::new(0.3).is_ok());
    }

    #[test]
    fn vocabulary_rules() {
        assert!(Vocabulary::new("aba".chars()).is_err());
        assert!(Vocabulary::new("a\tb".chars()).is_err());
        let v = Vocabulary::alphanumeric();
        assert_eq!(v.len(), 62);
        assert_eq!(v.num_classes(), 63);
        assert_eq!(v.blank_index(), 62);
        assert!(v.encode("ab$").is_err());
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn min_frames_counts_repeats() {
        assert_eq!(LabelSequence(vec![0, 0, 1, 1, 1]).min_frames(), 8);
        assert_eq!(LabelSequence(vec![0, 1, 0]).min_frames(), 3);
    }
}
