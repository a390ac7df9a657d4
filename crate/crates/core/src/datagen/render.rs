//! Bitmap glyph atlas and text rasterizer.

use std::collections::HashMap;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use serde::{Deserialize, Serialize};

use crate::ctc::Vocabulary;
use crate::error::{invalid, Error, Result};
use crate::raster::GrayImage;

/// Source cell size of the built-in font.
const CELL: usize = 8;
/// Ink columns given to glyphs without any ink (the space).
const BLANK_COLUMNS: usize = 3;
/// Horizontal offset per row of the italic shear, in pixels.
const ITALIC_SHEAR: f32 = 0.2;
const UNDERLINE_THICKNESS: usize = 2;
const MARGIN: usize = 4;

/// A binary glyph trimmed to its ink columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    width: usize,
    rows: [u8; CELL],
}

impl Glyph {
    fn from_cell(cell: [u8; CELL]) -> Self {
        let ink = cell.iter().fold(0u8, |acc, r| acc | r);
        if ink == 0 {
            return Self {
                width: BLANK_COLUMNS,
                rows: cell,
            };
        }
        let first = ink.trailing_zeros() as usize;
        let last = CELL - 1 - ink.leading_zeros() as usize;
        let rows = cell.map(|r| r >> first);
        Self {
            width: last - first + 1,
            rows,
        }
    }

    /// Width in source cells.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ink(&self, row: usize, col: usize) -> bool {
        col < self.width && self.rows[row] & (1 << col) != 0
    }
}

/// Glyph bitmaps for a character set, with the integer scale used to reach the target height.
#[derive(Debug, Clone)]
pub struct GlyphAtlas {
    glyphs: HashMap<char, Glyph>,
    x_scale: usize,
    y_scale: usize,
}

impl GlyphAtlas {
    /// Builds glyphs for every vocabulary character (plus space).
    pub fn for_vocabulary(vocab: &Vocabulary) -> Result<Self> {
        Self::from_chars(vocab.chars().iter().copied().chain([' ']))
    }

    /// Every printable ASCII character.
    pub fn ascii() -> Self {
        Self::from_chars((0x20u8..0x7f).map(char::from)).expect("basic font covers ASCII")
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut glyphs = HashMap::new();
        for c in chars {
            let cell = BASIC_FONTS.get(c).ok_or(Error::MissingGlyph(c))?;
            glyphs.insert(c, Glyph::from_cell(cell));
        }
        Ok(Self {
            glyphs,
            x_scale: 2,
            y_scale: 4,
        })
    }

    pub fn glyph(&self, c: char) -> Option<&Glyph> {
        self.glyphs.get(&c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.glyphs.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    /// Rendered glyph height in pixels.
    pub fn glyph_height(&self) -> usize {
        CELL * self.y_scale
    }

    /// Rendered advance of `c` in pixels, excluding spacing.
    pub fn advance(&self, c: char) -> Option<usize> {
        self.glyph(c).map(|g| g.width * self.x_scale)
    }
}

/// Per-image appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextStyle {
    pub bold: bool,
    pub italic: bool,
    pub underline: bool,
    /// Extra pixels between glyphs.
    pub spacing: usize,
    pub ink: u8,
    pub paper: u8,
    /// Rows above the glyph box.
    pub top: usize,
}

impl Default for TextStyle {
    fn default() -> Self {
        Self {
            bold: false,
            italic: false,
            underline: false,
            spacing: 2,
            ink: 0,
            paper: 255,
            top: 4,
        }
    }
}

/// Rasterizes `text` as dark ink on a light background, exactly `height` pixels tall.
pub fn render(text: &str, atlas: &GlyphAtlas, style: &TextStyle, height: usize) -> Result<GrayImage> {
    if text.is_empty() {
        return Err(invalid("cannot render empty text"));
    }
    let glyphs = text
        .chars()
        .map(|c| atlas.glyph(c).ok_or(Error::MissingGlyph(c)))
        .collect::<Result<Vec<_>>>()?;
    let gh = atlas.glyph_height();
    let extra = if style.underline { UNDERLINE_THICKNESS } else { 0 };
    if gh + extra > height {
        return Err(invalid(format!(
            "height {height} cannot hold {gh}-pixel glyphs"
        )));
    }
    let top = style.top.min(height - gh - extra);
    let bottom = top + gh;
    let slant = if style.italic {
        (ITALIC_SHEAR * gh as f32).ceil() as usize
    } else {
        0
    };
    let text_width: usize = glyphs.iter().map(|g| g.width * atlas.x_scale).sum::<usize>()
        + style.spacing * (glyphs.len() - 1)
        + usize::from(style.bold);
    let width = 2 * MARGIN + text_width + slant;

    let mut ink = vec![false; width * height];
    let mut x0 = MARGIN;
    for g in &glyphs {
        for row in 0..gh {
            let y = top + row;
            let shift = if style.italic {
                (ITALIC_SHEAR * (bottom - 1 - y) as f32).round() as usize
            } else {
                0
            };
            for col in 0..g.width * atlas.x_scale {
                if g.ink(row / atlas.y_scale, col / atlas.x_scale) {
                    let x = x0 + col + shift;
                    ink[y * width + x] = true;
                    if style.bold {
                        ink[y * width + x + 1] = true;
                    }
                }
            }
        }
        x0 += g.width * atlas.x_scale + style.spacing;
    }
    if style.underline {
        for y in bottom..bottom + UNDERLINE_THICKNESS {
            for x in MARGIN..MARGIN + text_width {
                ink[y * width + x] = true;
            }
        }
    }
    let pixels = ink
        .into_iter()
        .map(|on| if on { style.ink } else { style.paper })
        .collect();
    GrayImage::from_raw(width, height, pixels)
}

/// Width `render` will produce, without rasterizing.
pub fn rendered_width(text: &str, atlas: &GlyphAtlas, style: &TextStyle) -> Option<usize> {
    let mut w = 0;
    for c in text.chars() {
        w += atlas.advance(c)?;
    }
    let n = text.chars().count();
    if n == 0 {
        return None;
    }
    let slant = if style.italic {
        (ITALIC_SHEAR * atlas.glyph_height() as f32).ceil() as usize
    } else {
        0
    };
    Some(2 * MARGIN + w + style.spacing * (n - 1) + usize::from(style.bold) + slant)
}
