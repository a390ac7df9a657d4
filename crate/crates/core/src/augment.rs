//! Probabilistic image perturbations for training data.
//!
//! Each [`AugmentOp`] fires independently with its probability and draws its
//! magnitude uniformly from its range. Only [`AugmentKind::PadEdges`] changes
//! image dimensions; geometric ops resample into the same canvas and fill
//! revealed area with white.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{GrayImage, WHITE};

pub const MAX_ROTATION_DEGREES: f64 = 10.0;
pub const MAX_SHEAR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentKind {
    /// Additive noise with standard deviation drawn from `sigma`.
    GaussianNoise { sigma: [f64; 2] },
    /// Fraction `density` of pixels set to black or white.
    SaltPepper { density: [f64; 2] },
    /// Multiplicative noise `v * (1 + n)`, `n ~ N(0, sigma)`.
    Speckle { sigma: [f64; 2] },
    /// Straight strokes across the image.
    RandomLines {
        count: [usize; 2],
        thickness: [usize; 2],
        intensity: [u8; 2],
    },
    /// White margins on a random subset of `edges` sides, each `pad` pixels wide.
    PadEdges { pad: [usize; 2], edges: [usize; 2] },
    Rotate { degrees: [f64; 2] },
    /// Horizontal shear `x' = x + k (y - cy)`.
    Shear { k: [f64; 2] },
    /// Thickens dark strokes with a `size`×`size` minimum filter.
    MorphDilate { size: [usize; 2] },
    /// Thins dark strokes with a `size`×`size` maximum filter.
    MorphErode { size: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOp {
    pub probability: f64,
    #[serde(flatten)]
    pub kind: AugmentKind,
}

impl AugmentOp {
    pub fn new(probability: f64, kind: AugmentKind) -> Self {
        Self { probability, kind }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AugmentKind::GaussianNoise { .. } => "gaussian_noise",
            AugmentKind::SaltPepper { .. } => "salt_pepper",
            AugmentKind::Speckle { .. } => "speckle",
            AugmentKind::RandomLines { .. } => "random_lines",
            AugmentKind::PadEdges { .. } => "pad_edges",
            AugmentKind::Rotate { .. } => "rotate",
            AugmentKind::Shear { .. } => "shear",
            AugmentKind::MorphDilate { .. } => "morph_dilate",
            AugmentKind::MorphErode { .. } => "morph_erode",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("augment op {}: {what}", self.name())));
        if !(0.0..=1.0).contains(&self.probability) {
            return bad("probability outside [0, 1]");
        }
        fn ordered<T: PartialOrd>(r: &[T; 2]) -> bool {
            r[0] <= r[1]
        }
        match &self.kind {
            AugmentKind::GaussianNoise { sigma } | AugmentKind::Speckle { sigma } => {
                if !ordered(sigma) || sigma[0] < 0.0 || !sigma[1].is_finite() {
                    return bad("sigma range must be finite, ordered and non-negative");
                }
            }
            AugmentKind::SaltPepper { density } => {
                if !ordered(density) || density[0] < 0.0 || density[1] > 1.0 {
                    return bad("density range must be ordered within [0, 1]");
                }
            }
            AugmentKind::RandomLines {
                count,
                thickness,
                intensity,
            } => {
                if !ordered(count) || !ordered(thickness) || !ordered(intensity) || thickness[0] == 0 {
                    return bad("ranges must be ordered with thickness at least 1");
                }
            }
            AugmentKind::PadEdges { pad, edges } => {
                if !ordered(pad) || !ordered(edges) || edges[1] > 4 {
                    return bad("ranges must be ordered with at most 4 edges");
                }
            }
            AugmentKind::Rotate { degrees } => {
                if !ordered(degrees) || degrees.iter().any(|d| !(d.abs() <= MAX_ROTATION_DEGREES)) {
                    return bad("rotation range must be ordered within ±10 degrees");
                }
            }
            AugmentKind::Shear { k } => {
                if !ordered(k) || k.iter().any(|v| !(v.abs() <= MAX_SHEAR)) {
                    return bad("shear range must be ordered within ±0.3");
                }
            }
            AugmentKind::MorphDilate { size } | AugmentKind::MorphErode { size } => {
                if !ordered(size) || size[0] == 0 {
                    return bad("size range must be ordered and at least 1");
                }
            }
        }
        Ok(())
    }

    fn run<R: Rng + ?Sized>(&self, image: &GrayImage, rng: &mut R) -> GrayImage {
        fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..=r[1])
            }
        }
        match &self.kind {
            AugmentKind::GaussianNoise { sigma } => gaussian_noise(image, uniform(rng, *sigma), rng),
            AugmentKind::SaltPepper { density } => salt_pepper(image, uniform(rng, *density), rng),
            AugmentKind::Speckle { sigma } => speckle(image, uniform(rng, *sigma), rng),
            AugmentKind::RandomLines {
                count,
                thickness,
                intensity,
            } => {
                let n = rng.random_range(count[0]..=count[1]);
                random_lines(image, n, *thickness, *intensity, rng)
            }
            AugmentKind::PadEdges { pad, edges } => {
                let n = rng.random_range(edges[0]..=edges[1]);
                let mut sides = [0usize, 1, 2, 3];
                for i in 0..n {
                    let j = rng.random_range(i..4);
                    sides.swap(i, j);
                }
                let mut amounts = [0usize; 4];
                for &s in &sides[..n] {
                    amounts[s] = rng.random_range(pad[0]..=pad[1]);
                }
                pad_edges(image, amounts[0], amounts[1], amounts[2], amounts[3], WHITE)
            }
            AugmentKind::Rotate { degrees } => rotate(image, uniform(rng, *degrees), WHITE),
            AugmentKind::Shear { k } => shear(image, uniform(rng, *k), WHITE),
            AugmentKind::MorphDilate { size } => morph_dilate(image, rng.random_range(size[0]..=size[1])),
            AugmentKind::MorphErode { size } => morph_erode(image, rng.random_range(size[0]..=size[1])),
        }
    }
}

/// Ordered list of ops.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPipeline {
    pub ops: Vec<AugmentOp>,
}

impl AugmentPipeline {
    pub fn new(ops: Vec<AugmentOp>) -> Result<Self> {
        let p = Self { ops };
        p.validate()?;
        Ok(p)
    }

    /// Mild perturbations suited to clean rendered text; the magnitudes are our own choice.
    pub fn standard() -> Self {
        use AugmentKind::*;
        Self {
            ops: vec![
                AugmentOp::new(0.3, PadEdges { pad: [1, 6], edges: [1, 4] }),
                AugmentOp::new(0.3, Rotate { degrees: [-2.0, 2.0] }),
                AugmentOp::new(0.3, Shear { k: [-0.15, 0.15] }),
                AugmentOp::new(0.1, MorphDilate { size: [2, 2] }),
                AugmentOp::new(0.1, MorphErode { size: [2, 2] }),
                AugmentOp::new(0.1, RandomLines { count: [1, 2], thickness: [1, 2], intensity: [0, 120] }),
                AugmentOp::new(0.3, GaussianNoise { sigma: [2.0, 12.0] }),
                AugmentOp::new(0.2, SaltPepper { density: [0.002, 0.02] }),
                AugmentOp::new(0.2, Speckle { sigma: [0.02, 0.1] }),
            ],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.ops.iter().try_for_each(AugmentOp::validate)
    }

    /// Applies the pipeline with randomness drawn from `sample_seed` alone.
    pub fn apply(&self, image: &GrayImage, sample_seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        self.apply_with(image, &mut rng)
    }

    pub fn apply_with<R: Rng + ?Sized>(&self, image: &GrayImage, rng: &mut R) -> GrayImage {
        let mut out = image.clone();
        for op in &self.ops {
            if rng.random_bool(op.probability) {
                out = op.run(&out, rng);
            }
        }
        out
    }

    /// Names of the ops that fire for `sample_seed`, in order.
    pub fn fired(&self, image: &GrayImage, sample_seed: u64) -> Vec<&'static str> {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut out = image.clone();
        let mut names = Vec::new();
        for op in &self.ops {
            if rng.random_bool(op.probability) {
                out = op.run(&out, &mut rng);
                names.push(op.name());
            }
        }
        names
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_pixels(image: &GrayImage, mut f: impl FnMut(u8) -> u8) -> GrayImage {
    let mut out = image.clone();
    for p in out.pixels_mut() {
        *p = f(*p);
    }
    out
}

pub fn gaussian_noise<R: Rng + ?Sized>(image: &GrayImage, sigma: f64, rng: &mut R) -> GrayImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    map_pixels(image, |v| clamp_u8(v as f64 + normal.sample(rng)))
}

pub fn salt_pepper<R: Rng + ?Sized>(image: &GrayImage, density: f64, rng: &mut R) -> GrayImage {
    let density = density.clamp(0.0, 1.0);
    map_pixels(image, |v| {
        if rng.random_bool(density) {
            if rng.random_bool(0.5) {
                255
            } else {
                0
            }
        } else {
            v
        }
    })
}

pub fn speckle<R: Rng + ?Sized>(image: &GrayImage, sigma: f64, rng: &mut R) -> GrayImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    map_pixels(image, |v| clamp_u8(v as f64 * (1.0 + normal.sample(rng))))
}

pub fn random_lines<R: Rng + ?Sized>(
    image: &GrayImage,
    count: usize,
    thickness: [usize; 2],
    intensity: [u8; 2],
    rng: &mut R,
) -> GrayImage {
    let mut out = image.clone();
    let (w, h) = (image.width() as f64, image.height() as f64);
    for _ in 0..count {
        let (x0, y0) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let (x1, y1) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let t = rng.random_range(thickness[0]..=thickness[1]) as f64;
        let value = rng.random_range(intensity[0]..=intensity[1]);
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        let r = (t - 1.0) / 2.0;
        for s in 0..=steps {
            let f = s as f64 / steps as f64;
            let (cx, cy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (xa, xb) = ((cx - r).round().max(0.0) as usize, (cx + r).round() as usize);
            let (ya, yb) = ((cy - r).round().max(0.0) as usize, (cy + r).round() as usize);
            for y in ya..=yb.min(image.height() - 1) {
                for x in xa..=xb.min(image.width() - 1) {
                    out.set(x, y, value);
                }
            }
        }
    }
    out
}

/// Grows the canvas by the given margins, keeping the original at offset `(left, top)`.
pub fn pad_edges(image: &GrayImage, top: usize, bottom: usize, left: usize, right: usize, fill: u8) -> GrayImage {
    let (w, h) = (image.width(), image.height());
    let mut out = GrayImage::new(w + left + right, h + top + bottom, fill);
    for y in 0..h {
        for x in 0..w {
            out.set(x + left, y + top, image.get(x, y));
        }
    }
    out
}

/// Resamples through an inverse map from output to source coordinates.
fn warp(image: &GrayImage, fill: u8, inverse: impl Fn(f64, f64) -> (f64, f64)) -> GrayImage {
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            let (sx, sy) = inverse(x as f64, y as f64);
            out.set(x, y, clamp_u8(image.sample(sx, sy, fill)));
        }
    }
    out
}

/// Counter-clockwise rotation about the image center, on the same canvas.
pub fn rotate(image: &GrayImage, degrees: f64, fill: u8) -> GrayImage {
    let (s, c) = degrees.to_radians().sin_cos();
    let cx = (image.width() as f64 - 1.0) / 2.0;
    let cy = (image.height() as f64 - 1.0) / 2.0;
    warp(image, fill, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        // Image rows grow downwards, so a visual counter-clockwise turn maps back with +sin on y.
        (cx + c * dx - s * dy, cy + s * dx + c * dy)
    })
}

pub fn shear(image: &GrayImage, k: f64, fill: u8) -> GrayImage {
    let cy = (image.height() as f64 - 1.0) / 2.0;
    warp(image, fill, |x, y| (x - k * (y - cy), y))
}

fn rank_filter(image: &GrayImage, size: usize, pick_min: bool) -> GrayImage {
    if size <= 1 {
        return image.clone();
    }
    let lo = (size - 1) / 2;
    let hi = size / 2;
    let (w, h) = (image.width(), image.height());
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = if pick_min { u8::MAX } else { u8::MIN };
            for yy in y.saturating_sub(lo)..=(y + hi).min(h - 1) {
                for xx in x.saturating_sub(lo)..=(x + hi).min(w - 1) {
                    let v = image.get(xx, yy);
                    acc = if pick_min { acc.min(v) } else { acc.max(v) };
                }
            }
            out.set(x, y, acc);
        }
    }
    out
}

pub fn morph_dilate(image: &GrayImage, size: usize) -> GrayImage {
    rank_filter(image, size, true)
}

pub fn morph_erode(image: &GrayImage, size: usize) -> GrayImage {
    rank_filter(image, size, false)
}
