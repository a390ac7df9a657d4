use easter_core::tensor::conv_output_len;
use easter_core::{Mode, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn conv_length_law_holds_for_every_geometry() {
    let mut tape = Tape::<f32>::no_grad();
    for steps in 1..=100 {
        let x = tape.constant(Tensor::full([1, 2, steps], 1.0));
        for kernel in [1, 3, 4, 6, 7] {
            let w = tape.constant(Tensor::full([3, 2, kernel], 0.5));
            let b = tape.constant(Tensor::zeros([3]));
            for stride in [1, 2] {
                for dilation in [1, 2] {
                    let y = tape.conv1d(x, w, b, stride, dilation).unwrap();
                    let expected = steps.div_ceil(stride);
                    assert_eq!(tape.value(y).shape(), &[1, 3, expected]);
                    assert_eq!(conv_output_len(steps, stride), expected);
                }
            }
        }
    }
}

#[test]
fn even_kernel_padding_is_left_light() {
    // K=4, stride 1: pad left 1, right 2. A delta at t=0 lands on taps 1..4.
    let mut tape = Tape::<f64>::no_grad();
    let mut input = vec![0.0; 6];
    input[0] = 1.0;
    let x = tape.constant(Tensor::from_f64([1, 1, 6], &input).unwrap());
    let w = tape.constant(Tensor::from_f64([1, 1, 4], &[1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = tape.constant(Tensor::zeros([1]));
    let y = tape.conv1d(x, w, b, 1, 1).unwrap();
    assert_eq!(tape.value(y).data(), &[2.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn log_softmax_fixed_cases() {
    let mut tape = Tape::<f64>::no_grad();
    let x = tape.constant(Tensor::from_f64([2], &[0.0, 0.0]).unwrap());
    let y = tape.log_softmax(x);
    for v in tape.value(y).data() {
        assert!((v - 0.5f64.ln()).abs() < 1e-12);
    }
    let x = tape.constant(Tensor::from_f64([2], &[1000.0, 0.0]).unwrap());
    let y = tape.log_softmax(x);
    assert!(tape.value(y).data().iter().all(|v| v.is_finite()));
}

#[test]
fn dropout_identities_and_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut tape = Tape::<f32>::no_grad();
    let data: Vec<f32> = (0..50).map(|i| i as f32).collect();
    let x = tape.constant(Tensor::new([50], data.clone()).unwrap());
    for mode in [Mode::Train, Mode::Infer] {
        let y = tape.dropout(x, 0.0, mode, &mut rng).unwrap();
        assert_eq!(tape.value(y).data(), data.as_slice());
    }
    let y = tape.dropout(x, 0.7, Mode::Infer, &mut rng).unwrap();
    assert_eq!(tape.value(y).data(), data.as_slice());
    assert!(tape.dropout(x, 1.0, Mode::Train, &mut rng).is_err());
}

#[test]
fn dropout_zero_fraction_at_half_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tape = Tape::<f32>::no_grad();
    let x = tape.constant(Tensor::full([100_000], 1.0));
    let y = tape.dropout(x, 0.5, Mode::Train, &mut rng).unwrap();
    let zeros = tape.value(y).data().iter().filter(|&&v| v == 0.0).count();
    let frac = zeros as f64 / 100_000.0;
    assert!((frac - 0.5).abs() <= 0.01, "{frac}");
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn inverted_dropout_preserves_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data: Vec<f32> = (0..1_000_000).map(|_| rng.random_range(0.0..1.0)).collect();
    let mean_in = data.iter().map(|&v| v as f64).sum::<f64>() / data.len() as f64;
    let mut tape = Tape::<f32>::no_grad();
    let x = tape.constant(Tensor::new([data.len()], data).unwrap());
    let y = tape.dropout(x, 0.4, Mode::Train, &mut rng).unwrap();
    let out = tape.value(y).data();
    let mean_out = out.iter().map(|&v| v as f64).sum::<f64>() / out.len() as f64;
    assert!((mean_out / mean_in - 1.0).abs() < 0.02, "{mean_in} -> {mean_out}");
}

proptest! {
    #[test]
    fn log_softmax_rows_normalize(
        rows in 1usize..6,
        values in prop::collection::vec(-50.0f64..50.0, 1..40)
    ) {
        let cols = values.len();
        let data: Vec<f64> = (0..rows).flat_map(|r| values.iter().map(move |v| v * (r + 1) as f64)).collect();
        let mut tape = Tape::<f64>::no_grad();
        let x = tape.constant(Tensor::new([rows, cols], data).unwrap());
        let y = tape.log_softmax(x);
        for row in tape.value(y).data().chunks(cols) {
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn f32_log_softmax_rows_normalize(values in prop::collection::vec(-30.0f32..30.0, 2..64)) {
        let cols = values.len();
        let mut tape = Tape::<f32>::no_grad();
        let x = tape.constant(Tensor::new([cols], values).unwrap());
        let y = tape.log_softmax(x);
        let total: f64 = tape.value(y).data().iter().map(|&v| (v as f64).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mask_time_zeroes_exactly_the_tail(
        lengths in prop::collection::vec(1usize..9, 1..4)
    ) {
        let steps = 8;
        let n = lengths.len();
        let mut tape = Tape::<f32>::no_grad();
        let x = tape.constant(Tensor::full([n, 2, steps], 3.0));
        let y = tape.mask_time(x, &lengths).unwrap();
        let out = tape.value(y).data();
        for (s, &len) in lengths.iter().enumerate() {
            for c in 0..2 {
                for t in 0..steps {
                    let v = out[(s * 2 + c) * steps + t];
                    prop_assert_eq!(v, if t < len { 3.0 } else { 0.0 });
                }
            }
        }
    }
}
