use easter_core::augment::{
    gaussian_noise, morph_dilate, morph_erode, pad_edges, rotate, shear, AugmentKind, AugmentOp, AugmentPipeline,
};
use easter_core::datagen::{render, GlyphAtlas, TextStyle};
use easter_core::GrayImage;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn text_image(text: &str) -> GrayImage {
    render(text, &GlyphAtlas::ascii(), &TextStyle::default(), 40).unwrap()
}

fn every_op_always() -> AugmentPipeline {
    use AugmentKind::*;
    AugmentPipeline::new(vec![
        AugmentOp::new(1.0, PadEdges { pad: [0, 5], edges: [1, 4] }),
        AugmentOp::new(1.0, Rotate { degrees: [-10.0, 10.0] }),
        AugmentOp::new(1.0, Shear { k: [-0.3, 0.3] }),
        AugmentOp::new(1.0, MorphDilate { size: [1, 3] }),
        AugmentOp::new(1.0, MorphErode { size: [1, 3] }),
        AugmentOp::new(1.0, RandomLines { count: [1, 3], thickness: [1, 3], intensity: [0, 255] }),
        AugmentOp::new(1.0, GaussianNoise { sigma: [0.0, 80.0] }),
        AugmentOp::new(1.0, SaltPepper { density: [0.0, 0.2] }),
        AugmentOp::new(1.0, Speckle { sigma: [0.0, 0.5] }),
    ])
    .unwrap()
}

#[test]
fn gaussian_residual_spread_over_a_million_pixels() {
    let image = GrayImage::new(1000, 1000, 128);
    let noisy = gaussian_noise(&image, 10.0, &mut ChaCha8Rng::seed_from_u64(3));
    let residuals: Vec<f64> = noisy.pixels().iter().map(|&p| p as f64 - 128.0).collect();
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (residuals.len() - 1) as f64;
    let sd = var.sqrt();
    assert!((9.0..=11.0).contains(&sd), "{sd}");
}

#[test]
fn zero_pads_are_identity_and_interior_is_preserved() {
    let image = text_image("Ab3");
    assert_eq!(pad_edges(&image, 0, 0, 0, 0, 255), image);
    let padded = pad_edges(&image, 1, 1, 1, 1, 255);
    assert_eq!((padded.width(), padded.height()), (image.width() + 2, image.height() + 2));
    for y in 0..image.height() {
        for x in 0..image.width() {
            assert_eq!(padded.get(x + 1, y + 1), image.get(x, y));
        }
    }
}

#[test]
fn geometric_ops_keep_the_canvas() {
    let image = text_image("hello");
    for out in [rotate(&image, 7.0, 255), shear(&image, -0.25, 255), morph_dilate(&image, 3), morph_erode(&image, 3)] {
        assert_eq!((out.width(), out.height()), (image.width(), image.height()));
    }
    assert_eq!(rotate(&image, 0.0, 255), image);
    assert_eq!(shear(&image, 0.0, 255), image);
}

#[test]
fn out_of_range_parameters_are_rejected() {
    let bad = [
        AugmentOp::new(1.5, AugmentKind::GaussianNoise { sigma: [1.0, 2.0] }),
        AugmentOp::new(0.5, AugmentKind::Rotate { degrees: [-11.0, 0.0] }),
        AugmentOp::new(0.5, AugmentKind::Shear { k: [0.0, 0.31] }),
        AugmentOp::new(0.5, AugmentKind::GaussianNoise { sigma: [3.0, 1.0] }),
    ];
    for op in bad {
        assert!(AugmentPipeline::new(vec![op.clone()]).is_err(), "{op:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pipeline_is_deterministic_and_range_safe(seed in any::<u64>(), text in "[a-zA-Z0-9]{1,6}") {
        let image = text_image(&text);
        let pipeline = every_op_always();
        let a = pipeline.apply(&image, seed);
        let b = pipeline.apply(&image, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.pixels().len(), a.width() * a.height());
        prop_assert!(a.width() >= image.width() && a.height() >= image.height());
    }

    #[test]
    fn standard_pipeline_only_pads(seed in any::<u64>()) {
        let image = text_image("x7Q");
        let out = AugmentPipeline::standard().apply(&image, seed);
        let fired = AugmentPipeline::standard().fired(&image, seed);
        if !fired.contains(&"pad_edges") {
            prop_assert_eq!((out.width(), out.height()), (image.width(), image.height()));
        }
    }

    #[test]
    fn pads_grow_dimensions_exactly(t in 0usize..5, b in 0usize..5, l in 0usize..5, r in 0usize..5) {
        let image = text_image("k");
        let out = pad_edges(&image, t, b, l, r, 255);
        prop_assert_eq!(out.width(), image.width() + l + r);
        prop_assert_eq!(out.height(), image.height() + t + b);
        for y in 0..image.height() {
            for x in 0..image.width() {
                prop_assert_eq!(out.get(x + l, y + t), image.get(x, y));
            }
        }
    }
}
