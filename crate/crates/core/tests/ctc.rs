use easter_core::ctc::{
    best_path, collapse, ctc_loss, ctc_loss_and_grad, greedy_decode, weighted_ctc_loss,
    weighted_ctc_loss_and_grad,
};
use easter_core::{Error, LabelSequence, LogProbLattice, Vocabulary, WeightedCtcConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lattice(rng: &mut ChaCha8Rng, frames: usize, classes: usize) -> LogProbLattice {
    let mut values = Vec::with_capacity(frames * classes);
    for _ in 0..frames {
        let logits: Vec<f64> = (0..classes).map(|_| rng.random_range(-2.0..2.0)).collect();
        let norm = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
        values.extend(logits.iter().map(|l| l - norm));
    }
    LogProbLattice::new(values, frames, classes).unwrap()
}

/// A random label that fits in `frames`, possibly empty.
fn random_feasible_label(rng: &mut ChaCha8Rng, chars: usize, frames: usize, max_len: usize) -> LabelSequence {
    loop {
        let len = rng.random_range(0..=max_len);
        let label = LabelSequence((0..len).map(|_| rng.random_range(0..chars)).collect());
        if label.min_frames() <= frames {
            return label;
        }
    }
}

/// Independent collapse: run-length grouping, then blank removal.
fn collapse_oracle(path: &[usize], blank: usize) -> Vec<usize> {
    let mut runs: Vec<usize> = Vec::new();
    for &k in path {
        if runs.last() != Some(&k) {
            runs.push(k);
        }
    }
    runs.into_iter().filter(|&k| k != blank).collect()
}

/// `-ln` of the summed probability of every path collapsing to `label`.
fn brute_force_loss(lattice: &LogProbLattice, label: &LabelSequence) -> f64 {
    let (frames, classes) = (lattice.valid_length(), lattice.classes());
    let mut total = 0.0;
    let mut path = vec![0usize; frames];
    for code in 0..classes.pow(frames as u32) {
        let mut c = code;
        let mut log_p = 0.0;
        for (t, slot) in path.iter_mut().enumerate() {
            *slot = c % classes;
            c /= classes;
            log_p += lattice.frame(t)[*slot];
        }
        if collapse_oracle(&path, lattice.blank()) == label.indices() {
            total += log_p.exp();
        }
    }
    -total.ln()
}

#[test]
fn loss_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let frames = rng.random_range(1..=5);
        let chars = rng.random_range(1..=3);
        let lattice = random_lattice(&mut rng, frames, chars + 1);
        let label = random_feasible_label(&mut rng, chars, frames, 3);
        let fast = ctc_loss(&lattice, &label).unwrap();
        let slow = brute_force_loss(&lattice, &label);
        assert!((fast - slow).abs() <= 1e-6, "trial {trial}: {fast} vs {slow}");
    }
}

#[test]
fn padded_frames_do_not_change_the_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let frames = rng.random_range(1..=5);
        let lattice = random_lattice(&mut rng, frames, 4);
        let label = random_feasible_label(&mut rng, 3, frames, 3);
        let mut padded_values = lattice.values().to_vec();
        padded_values.extend((0..8).map(|_| rng.random_range(-3.0..0.0)));
        let padded = LogProbLattice::with_valid_length(padded_values, frames + 2, 4, frames).unwrap();
        let a = ctc_loss_and_grad(&lattice, &label).unwrap();
        let b = ctc_loss_and_grad(&padded, &label).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(&b.grad[..a.grad.len()], &a.grad[..]);
        assert!(b.grad[a.grad.len()..].iter().all(|&g| g == 0.0));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-6;
    for trial in 0..20 {
        let frames = rng.random_range(2..=8);
        let classes = rng.random_range(2..=5);
        let mut lattice = random_lattice(&mut rng, frames, classes);
        let label = random_feasible_label(&mut rng, classes - 1, frames, 4);
        let analytic = ctc_loss_and_grad(&lattice, &label).unwrap().grad;
        for i in 0..lattice.values().len() {
            let orig = lattice.values()[i];
            lattice.values_mut()[i] = orig + h;
            let up = ctc_loss(&lattice, &label).unwrap();
            lattice.values_mut()[i] = orig - h;
            let down = ctc_loss(&lattice, &label).unwrap();
            lattice.values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs());
            let rel = if scale < 1e-9 { 0.0 } else { (analytic[i] - numeric).abs() / scale };
            assert!(rel < 1e-3, "trial {trial} entry {i}: {} vs {numeric}", analytic[i]);
        }
    }
}

#[test]
fn uniform_weights_halve_loss_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let half = WeightedCtcConfig::new(0.5).unwrap();
    for trial in 0..100 {
        let frames = rng.random_range(1..=12);
        let classes = rng.random_range(2..=6);
        let lattice = random_lattice(&mut rng, frames, classes);
        let label = random_feasible_label(&mut rng, classes - 1, frames, 5);
        let plain = ctc_loss_and_grad(&lattice, &label).unwrap();
        let weighted = weighted_ctc_loss_and_grad(&lattice, &label, &half).unwrap();
        assert!(
            (weighted.loss - 0.5 * plain.loss).abs() <= 1e-9,
            "trial {trial}: {} vs {}",
            weighted.loss,
            plain.loss
        );
        for (w, p) in weighted.grad.iter().zip(&plain.grad) {
            assert!((w - 0.5 * p).abs() <= 1e-12);
        }
    }
}

#[test]
fn larger_alpha_shifts_gradient_toward_characters() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let share = |grad: &[f64], classes: usize| {
        let blank = classes - 1;
        let (mut chars, mut blanks) = (0.0, 0.0);
        for (i, g) in grad.iter().enumerate() {
            if i % classes == blank {
                blanks += g * g;
            } else {
                chars += g * g;
            }
        }
        chars.sqrt() / blanks.sqrt()
    };
    for _ in 0..20 {
        let lattice = random_lattice(&mut rng, 8, 4);
        let label = LabelSequence(vec![0, 1, 2]);
        let low = weighted_ctc_loss_and_grad(&lattice, &label, &WeightedCtcConfig::new(0.3).unwrap()).unwrap();
        let high = weighted_ctc_loss_and_grad(&lattice, &label, &WeightedCtcConfig::new(0.7).unwrap()).unwrap();
        assert!(share(&high.grad, 4) > share(&low.grad, 4));
    }
}

#[test]
fn empty_label_scales_by_blank_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = WeightedCtcConfig::new(0.9).unwrap();
    for _ in 0..20 {
        let lattice = random_lattice(&mut rng, 6, 3);
        let empty = LabelSequence(Vec::new());
        let plain = ctc_loss(&lattice, &empty).unwrap();
        let weighted = weighted_ctc_loss(&lattice, &empty, &cfg).unwrap();
        assert!((weighted - 0.1 * plain).abs() <= 1e-12);
    }
}

#[test]
fn infeasible_label_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let lattice = random_lattice(&mut rng, 3, 3);
    let err = ctc_loss(&lattice, &LabelSequence(vec![0, 0, 1])).unwrap_err();
    assert!(matches!(err, Error::InfeasibleAlignment { required: 4, frames: 3, .. }));
}

#[test]
fn example_path_decodes() {
    let vocab = Vocabulary::new("1ba".chars()).unwrap();
    let e = vocab.blank_index();
    let path = [0, e, 1, 1, e, e, 2];
    assert_eq!(vocab.decode(collapse(&path, e).indices()), "1ba");

    let mut probs = vec![0.05; path.len() * 4];
    for (t, &k) in path.iter().enumerate() {
        probs[t * 4 + k] = 0.85;
    }
    let lattice = LogProbLattice::from_probs(&probs, path.len(), 4).unwrap();
    assert_eq!(greedy_decode(&lattice, &vocab), "1ba");
}

#[test]
fn thousand_random_paths_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..1000 {
        let classes = rng.random_range(2..=6);
        let blank = classes - 1;
        let len = rng.random_range(0..=30);
        let path: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        let out = collapse(&path, blank);
        assert_eq!(out.indices(), collapse_oracle(&path, blank).as_slice());
        assert!(!out.indices().contains(&blank));
    }
}

fn interleave_blanks(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut path = vec![blank];
    for &k in labels {
        path.extend([k, blank]);
    }
    path
}

proptest! {
    #[test]
    fn collapse_has_no_blanks_and_no_unseparated_repeats(
        path in prop::collection::vec(0usize..5, 0..40)
    ) {
        let blank = 4;
        let out = collapse(&path, blank);
        prop_assert!(!out.indices().contains(&blank));
        let expected = collapse_oracle(&path, blank);
        prop_assert_eq!(out.indices(), expected.as_slice());
        prop_assert!(out.len() <= path.len());
    }

    #[test]
    fn collapse_output_survives_reembedding(
        labels in prop::collection::vec(0usize..4, 0..20)
    ) {
        let blank = 4;
        let path = interleave_blanks(&labels, blank);
        let once = collapse(&path, blank);
        prop_assert_eq!(once.indices(), labels.as_slice());
        let twice = collapse(&interleave_blanks(once.indices(), blank), blank);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn greedy_output_comes_from_the_argmax_path(
        seed in any::<u64>(), frames in 1usize..20
    ) {
        let vocab = Vocabulary::new("abc".chars()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lattice = random_lattice(&mut rng, frames, vocab.num_classes());
        let path = best_path(&lattice);
        let text = greedy_decode(&lattice, &vocab);
        for c in text.chars() {
            let k = vocab.index_of(c).unwrap();
            prop_assert!(path.contains(&k));
        }
        prop_assert!(text.chars().count() <= frames);
    }

    #[test]
    fn feasibility_is_monotone_in_frames(
        label in prop::collection::vec(0usize..3, 0..6), frames in 1usize..12
    ) {
        let label = LabelSequence(label);
        let mut rng = ChaCha8Rng::seed_from_u64(frames as u64);
        let short = random_lattice(&mut rng, frames, 4);
        let long = random_lattice(&mut rng, frames + 1, 4);
        if ctc_loss(&short, &label).is_ok() {
            prop_assert!(ctc_loss(&long, &label).is_ok());
        }
        prop_assert_eq!(ctc_loss(&short, &label).is_ok(), label.min_frames() <= frames);
    }

    #[test]
    fn loss_is_nonnegative_on_normalized_lattices(
        seed in any::<u64>(), frames in 1usize..10
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lattice = random_lattice(&mut rng, frames, 4);
        let label = random_feasible_label(&mut rng, 3, frames, 4);
        let loss = ctc_loss(&lattice, &label).unwrap();
        prop_assert!(loss >= -1e-12 && loss.is_finite());
    }
}
