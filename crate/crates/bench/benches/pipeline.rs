use criterion::{criterion_group, criterion_main, Criterion};
use easter_core::augment::AugmentPipeline;
use easter_core::datagen::{Generator, GeneratorConfig};
use easter_core::{EasterModel, GrayImage, ImageBatch, ModelConfig, Tape, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn images(n: u64) -> Vec<GrayImage> {
    let generator = Generator::new(GeneratorConfig::alphanumeric(n as usize, 0)).unwrap();
    generator.samples(0..n).unwrap().into_iter().map(|(_, img)| img).collect()
}

fn model(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = EasterModel::build(ModelConfig::easter_3x3(Vocabulary::alphanumeric()), &mut rng).unwrap();
    let batch = ImageBatch::from_images(&images(16), 40).unwrap();
    let mut group = c.benchmark_group("model_3x3_batch16");
    group.sample_size(10);
    group.bench_function("infer", |b| b.iter(|| net.infer(&batch).unwrap()));
    group.bench_function("train_forward_backward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let out = net.forward(&mut tape, &batch, &mut rng).unwrap();
            let s = tape.sum(out.log_probs);
            tape.backward(s).unwrap();
        })
    });
    group.finish();
}

fn data(c: &mut Criterion) {
    let generator = Generator::new(GeneratorConfig::default()).unwrap();
    let mut i = 0;
    c.bench_function("render_document_sample", |b| {
        b.iter(|| {
            i += 1;
            generator.sample(i).unwrap()
        })
    });
    let pipeline = AugmentPipeline::standard();
    let img = images(1).remove(0);
    let mut seed = 0;
    c.bench_function("augment_standard", |b| {
        b.iter(|| {
            seed += 1;
            pipeline.apply(&img, seed)
        })
    });
}

criterion_group!(benches, model, data);
criterion_main!(benches);
