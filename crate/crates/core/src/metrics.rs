//! Levenshtein distance and corpus-level character / word error rates.
//!
//! Rates are total edit distance divided by total reference length.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimum number of insertions, deletions and substitutions turning `a` into `b`.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn char_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

pub fn word_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<&str> = a.split_whitespace().collect();
    let b: Vec<&str> = b.split_whitespace().collect();
    edit_distance(&a, &b)
}

fn corpus_rate<S: AsRef<str>>(
    refs: &[S],
    hyps: &[S],
    unit: &str,
    len: impl Fn(&str) -> usize,
    dist: impl Fn(&str, &str) -> usize,
) -> Result<f64> {
    if refs.len() != hyps.len() {
        return Err(invalid(format!(
            "{} references but {} hypotheses",
            refs.len(),
            hyps.len()
        )));
    }
    let total: usize = refs.iter().map(|r| len(r.as_ref())).sum();
    if total == 0 {
        return Err(invalid(format!("reference corpus has no {unit}")));
    }
    let errors: usize = refs
        .iter()
        .zip(hyps)
        .map(|(r, h)| dist(r.as_ref(), h.as_ref()))
        .sum();
    Ok(errors as f64 / total as f64)
}

/// Character error rate.
pub fn cer<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<f64> {
    corpus_rate(refs, hyps, "characters", |s| s.chars().count(), char_edit_distance)
}

/// Word error rate over whitespace-separated tokens.
pub fn wer<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<f64> {
    corpus_rate(
        refs,
        hyps,
        "words",
        |s| s.split_whitespace().count(),
        word_edit_distance,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
    pub char_errors: usize,
    pub reference_chars: usize,
    pub word_errors: usize,
    pub reference_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cer: f64,
    pub wer: f64,
    /// `1 - wer`.
    pub word_accuracy: f64,
    /// Fraction of samples transcribed exactly.
    pub exact_match: f64,
    pub samples: usize,
    pub records: Vec<SampleRecord>,
}

impl EvalReport {
    /// Scores hypotheses against references. With `case_fold`, both sides
    /// are lower-cased first.
    pub fn compute<S: AsRef<str>>(ids: &[S], refs: &[S], hyps: &[S], case_fold: bool) -> Result<Self> {
        if ids.len() != refs.len() || refs.len() != hyps.len() {
            return Err(invalid("ids, references and hypotheses differ in length"));
        }
        let fold = |s: &str| if case_fold { s.to_lowercase() } else { s.to_string() };
        let refs: Vec<String> = refs.iter().map(|s| fold(s.as_ref())).collect();
        let hyps: Vec<String> = hyps.iter().map(|s| fold(s.as_ref())).collect();
        let cer = cer(&refs, &hyps)?;
        let wer = wer(&refs, &hyps)?;
        let records: Vec<SampleRecord> = ids
            .iter()
            .zip(refs.iter().zip(&hyps))
            .map(|(id, (r, h))| SampleRecord {
                id: id.as_ref().to_string(),
                reference: r.clone(),
                hypothesis: h.clone(),
                char_errors: char_edit_distance(r, h),
                reference_chars: r.chars().count(),
                word_errors: word_edit_distance(r, h),
                reference_words: r.split_whitespace().count(),
            })
            .collect();
        let exact = records.iter().filter(|r| r.reference == r.hypothesis).count();
        Ok(Self {
            cer,
            wer,
            word_accuracy: 1.0 - wer,
            exact_match: exact as f64 / records.len() as f64,
            samples: records.len(),
            records,
        })
    }

    /// Summary without per-sample rows, as pretty JSON.
    pub fn summary_json(&self) -> String {
        let summary = serde_json::json!({
            "cer": self.cer,
            "wer": self.wer,
            "word_accuracy": self.word_accuracy,
            "exact_match": self.exact_match,
            "samples": self.samples,
        });
        serde_json::to_string_pretty(&summary).expect("plain values serialize")
    }

    /// One tab-separated row per sample, with a header line.
    pub fn records_tsv(&self) -> String {
        let mut out = String::from(
            "id\treference\thypothesis\tchar_errors\treference_chars\tword_errors\treference_words\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.id, r.reference, r.hypothesis, r.char_errors, r.reference_chars, r.word_errors, r.reference_words
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn known_distances() {
        assert_eq!(char_edit_distance("", ""), 0);
        assert_eq!(char_edit_distance("abc", "abc"), 0);
        assert_eq!(char_edit_distance("kitten", "sitting"), 3);
        assert_eq!(char_edit_distance("", "abcd"), 4);
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer(&["our"], &["ow"]).unwrap(), 2.0 / 3.0);
        assert_eq!(cer(&["same", "text"], &["same", "text"]).unwrap(), 0.0);
        assert!(cer(&[""], &["x"]).is_err());
        assert!(cer(&["a", "b"], &["a"]).is_err());
    }

    #[test]
    fn single_word_wer_is_mismatch_rate() {
        let refs = ["alpha", "beta", "gamma", "delta"];
        let hyps = ["alpha", "beto", "gamma", "deltas"];
        assert_eq!(wer(&refs, &hyps).unwrap(), 0.5);
        let r = EvalReport::compute(&["1", "2", "3", "4"], &refs, &hyps, false).unwrap();
        assert_eq!(r.word_accuracy, 0.5);
        assert_eq!(r.exact_match, 0.5);
    }

    #[test]
    fn case_folding() {
        let r = EvalReport::compute(&["x"], &["Hello"], &["hello"], true).unwrap();
        assert_eq!(r.cer, 0.0);
        let r = EvalReport::compute(&["x"], &["Hello"], &["hello"], false).unwrap();
        assert_eq!(r.cer, 0.2);
    }

    #[test]
    fn report_tsv_has_one_row_per_sample() {
        let r = EvalReport::compute(&["a", "b"], &["one two", "three"], &["one", "three"], false).unwrap();
        assert_eq!(r.records_tsv().lines().count(), 3);
        assert_eq!(r.wer, 1.0 / 3.0);
        assert!((r.word_accuracy - (1.0 - r.wer)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn bounded_by_longer_string(a in "[abc]{0,12}", b in "[abc]{0,12}") {
            let d = char_edit_distance(&a, &b);
            prop_assert!(d <= a.len().max(b.len()));
            prop_assert!(d >= a.len().abs_diff(b.len()));
            prop_assert_eq!(d, char_edit_distance(&b, &a));
        }
    }
}
