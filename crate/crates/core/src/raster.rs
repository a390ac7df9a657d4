//! 8-bit grayscale rasters, PGM (P5) encoding, resampling and loading.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const WHITE: u8 = 255;

/// Luminance weights applied to R, G and B when converting color input.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major 8-bit grayscale image; 0 is black.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} image given {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Converts interleaved 8-bit RGB with fixed luminance weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} RGB image given {} bytes",
                rgb.len()
            )));
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| {
                let y = LUMA_WEIGHTS[0] * p[0] as f64
                    + LUMA_WEIGHTS[1] * p[1] as f64
                    + LUMA_WEIGHTS[2] * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Bilinear sample at a continuous position; outside reads `background`.
    pub fn sample(&self, x: f64, y: f64, background: u8) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let px = |xi: f64, yi: f64| -> f64 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                background as f64
            } else {
                self.get(xi as usize, yi as usize) as f64
            }
        };
        let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1.0, y0) * fx;
        let bottom = px(x0, y0 + 1.0) * (1.0 - fx) + px(x0 + 1.0, y0 + 1.0) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize(&self, width: usize, height: usize) -> GrayImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = GrayImage::new(width, height, WHITE);
        for y in 0..height {
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..width {
                let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let v = self.sample(src_x, src_y, WHITE);
                out.set(x, y, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    /// Scales to `height` rows, keeping the aspect ratio.
    pub fn resize_to_height(&self, height: usize) -> GrayImage {
        if self.height == height {
            return self.clone();
        }
        let width = ((self.width as f64 * height as f64 / self.height as f64).round() as usize).max(1);
        self.resize(width, height)
    }

    /// Binary PGM (P5) bytes.
    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Image {
            path: String::new(),
            message: m.to_string(),
        };
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PGM header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII PGM header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a binary PGM (P5) file"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed PGM header"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("only 8-bit PGM is supported"));
        }
        pos += 1; // single whitespace after maxval
        let body = bytes.get(pos..pos + width * height).ok_or_else(|| bad("truncated PGM data"))?;
        GrayImage::from_raw(width, height, body.to_vec())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode_pgm())?;
        Ok(())
    }

    /// Loads PGM directly; other formats are decoded and luminance-converted.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let attach = |e: Error| match e {
            Error::Image { message, .. } => Error::Image {
                path: path.display().to_string(),
                message,
            },
            other => other,
        };
        if bytes.starts_with(b"P5") {
            return Self::decode_pgm(&bytes).map_err(attach);
        }
        let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let rgb = decoded.to_rgb8();
        Self::from_rgb(rgb.width() as usize, rgb.height() as usize, rgb.as_raw()).map_err(attach)
    }
}
