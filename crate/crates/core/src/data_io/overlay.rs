use super::font::{glyph, GLYPH_HEIGHT, GLYPH_WIDTH};
use crate::postprocess::Detection;
use crate::raster::{Rgb, RgbImage};

pub const PREDICTION_COLOR: Rgb = [0, 255, 0];
pub const GT_COLOR: Rgb = [255, 0, 255];
const TEXT_COLOR: Rgb = [0, 0, 0];
const BORDER: i64 = 2;
const FONT_SCALE: i64 = 2;

/// Inclusive pixel rectangle; may extend past the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn is_empty(&self) -> bool {
        self.x1 < self.x0 || self.y1 < self.y0
    }
}

/// Pixel extent of a box's outline.
pub fn border_rect(det: &Detection) -> PixelRect {
    let c = det.bbox().corners();
    PixelRect {
        x0: c.x0.round() as i64,
        y0: c.y0.round() as i64,
        x1: (c.x1.round() as i64 - 1).max(c.x0.round() as i64),
        y1: (c.y1.round() as i64 - 1).max(c.y0.round() as i64),
    }
}

fn caption_text(det: &Detection) -> String {
    format!("{:.2}", det.confidence)
}

/// Area the confidence caption occupies: above the box when it fits,
/// otherwise just inside its top edge.
pub fn caption_rect(det: &Detection) -> PixelRect {
    let b = border_rect(det);
    let chars = caption_text(det).chars().count() as i64;
    let w = chars * (GLYPH_WIDTH as i64 + 1) * FONT_SCALE + FONT_SCALE;
    let h = GLYPH_HEIGHT as i64 * FONT_SCALE + 2 * FONT_SCALE;
    let y0 = if b.y0 - h >= 0 { b.y0 - h } else { b.y0 };
    PixelRect {
        x0: b.x0,
        y0,
        x1: b.x0 + w - 1,
        y1: y0 + h - 1,
    }
}

fn outline(img: &mut RgbImage, r: PixelRect, color: Rgb) {
    for y in r.y0..=r.y1 {
        for x in r.x0..=r.x1 {
            let edge = x < r.x0 + BORDER || x > r.x1 - BORDER || y < r.y0 + BORDER || y > r.y1 - BORDER;
            if edge {
                img.put(x, y, color);
            }
        }
    }
}

fn caption(img: &mut RgbImage, det: &Detection, color: Rgb) {
    let r = caption_rect(det);
    for y in r.y0..=r.y1 {
        for x in r.x0..=r.x1 {
            img.put(x, y, color);
        }
    }
    let mut pen_x = r.x0 + FONT_SCALE;
    let pen_y = r.y0 + FONT_SCALE;
    for ch in caption_text(det).chars() {
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..GLYPH_WIDTH {
                if bits >> (GLYPH_WIDTH - 1 - col) & 1 == 1 {
                    for dy in 0..FONT_SCALE {
                        for dx in 0..FONT_SCALE {
                            img.put(
                                pen_x + col as i64 * FONT_SCALE + dx,
                                pen_y + row as i64 * FONT_SCALE + dy,
                                TEXT_COLOR,
                            );
                        }
                    }
                }
            }
        }
        pen_x += (GLYPH_WIDTH as i64 + 1) * FONT_SCALE;
    }
}

/// Draws ground truth (if any) then predictions with confidence captions.
/// Boxes are in the image's pixel coordinates; anything off-image is clipped.
pub fn render_overlay(image: &RgbImage, dets: &[Detection], truth: Option<&[Detection]>) -> RgbImage {
    let mut out = image.clone();
    for gt in truth.unwrap_or_default() {
        outline(&mut out, border_rect(gt), GT_COLOR);
    }
    for d in dets {
        outline(&mut out, border_rect(d), PREDICTION_COLOR);
        caption(&mut out, d, PREDICTION_COLOR);
    }
    out
}
