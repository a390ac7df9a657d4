use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use easter_core::ctc::{ctc_loss_and_grad, weighted_ctc_loss_and_grad};
use easter_core::{LabelSequence, LogProbLattice, Tape, Tensor, WeightedCtcConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // One B1 sub-block of the 3x3 model on a batch of 16 lines, 90 frames each.
    let x = random(&mut rng, &[16, 128, 90]);
    let w = random(&mut rng, &[128, 128, 3]);
    let b = random(&mut rng, &[128]);
    c.bench_function("conv1d_forward_128x128x3", |bench| {
        bench.iter(|| {
            let mut tape = Tape::no_grad();
            let (x, w, b) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
            tape.conv1d(x, w, b, 1, 1).unwrap()
        })
    });
    c.bench_function("conv1d_forward_backward_128x128x3", |bench| {
        bench.iter(|| {
            let mut tape = Tape::new();
            let (x, w, b) = (tape.param(x.clone()), tape.param(w.clone()), tape.param(b.clone()));
            let y = tape.conv1d(x, w, b, 1, 1).unwrap();
            let s = tape.sum(y);
            tape.backward(s).unwrap();
        })
    });
}

fn lattice(rng: &mut ChaCha8Rng, frames: usize, classes: usize) -> LogProbLattice {
    let mut values = Vec::with_capacity(frames * classes);
    for _ in 0..frames {
        let logits: Vec<f64> = (0..classes).map(|_| rng.random_range(-3.0..3.0)).collect();
        let norm = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
        values.extend(logits.iter().map(|l| l - norm));
    }
    LogProbLattice::new(values, frames, classes).unwrap()
}

fn ctc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lat = lattice(&mut rng, 100, 63);
    let label = LabelSequence((0..25).map(|_| rng.random_range(0..62)).collect());
    c.bench_function("ctc_loss_grad_100x63_len25", |bench| {
        bench.iter(|| ctc_loss_and_grad(&lat, &label).unwrap())
    });
    let cfg = WeightedCtcConfig::new(0.7).unwrap();
    c.bench_function("weighted_ctc_loss_grad_100x63_len25", |bench| {
        bench.iter_batched(|| lat.clone(), |l| weighted_ctc_loss_and_grad(&l, &label, &cfg).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, conv, ctc);
criterion_main!(benches);
