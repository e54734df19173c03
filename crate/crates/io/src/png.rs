//! 8-bit PNG conversion for `[0, 1]` RGB images.

use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};
use trisplat_core::Image;

use crate::error::{IoError, Result};

/// sRGB transfer function, inverse direction.
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn to_rgb8(img: &Image) -> RgbImage {
    ImageBuffer::from_fn(img.width as u32, img.height as u32, |x, y| {
        let p = img.pixel(x as usize, y as usize);
        let q = |c: usize| (p[c.min(img.channels - 1)].clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([q(0), q(1), q(2)])
    })
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    to_rgb8(img).save(path).map_err(|e| IoError::format(path, e))
}

/// Decodes any PNG to RGB in `[0, 1]`; alpha is composited over `background`.
pub fn load_png(path: &Path, background: [f64; 3]) -> Result<Image> {
    let decoded = image::open(path).map_err(|e| IoError::format(path, e))?.into_rgba32f();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let mut out = Image::new(w, h, 3);
    for (x, y, p) in decoded.enumerate_pixels() {
        let a = p[3] as f64;
        let px = out.pixel_mut(x as usize, y as usize);
        for c in 0..3 {
            px[c] = p[c] as f64 * a + background[c] * (1.0 - a);
        }
    }
    Ok(out)
}
