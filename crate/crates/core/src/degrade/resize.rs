use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Nearest,
    Bilinear,
    /// Keys cubic convolution, `a = -0.5`.
    Bicubic,
}

/// Output dims for a scale factor: `round(d * scale)`, at least 1.
pub fn scaled_dims(height: usize, width: usize, scale: f64) -> Result<(usize, usize)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", format!("{scale} must be positive")));
    }
    let f = |d: usize| ((d as f64 * scale).round() as usize).max(1);
    Ok((f(height), f(width)))
}

pub fn resize_by(img: &ImageBuffer, scale: f64, interp: Interp) -> Result<ImageBuffer> {
    let (h, w) = scaled_dims(img.height(), img.width(), scale)?;
    resize(img, h, w, interp)
}

/// Separable resampling with half-pixel centers and edge-clamped taps.
/// No antialiasing prefilter is applied when downscaling.
pub fn resize(img: &ImageBuffer, height: usize, width: usize, interp: Interp) -> Result<ImageBuffer> {
    if height == 0 || width == 0 {
        return Err(invalid("target", format!("{height}x{width} has a zero side")));
    }
    let (h, w, c) = img.shape();
    if (h, w) == (height, width) && interp == Interp::Nearest {
        return Ok(img.clone());
    }
    let rows = taps(h, height, interp);
    let cols = taps(w, width, interp);
    let src = img.data();

    let mut tmp = vec![0.0; h * width * c];
    for y in 0..h {
        for (x, col) in cols.iter().enumerate() {
            for ch in 0..c {
                tmp[(y * width + x) * c + ch] =
                    col.iter().map(|&(sx, k)| k * src[(y * w + sx) * c + ch]).sum();
            }
        }
    }
    let mut out = vec![0.0; height * width * c];
    for (y, row) in rows.iter().enumerate() {
        for x in 0..width {
            for ch in 0..c {
                out[(y * width + x) * c + ch] =
                    row.iter().map(|&(sy, k)| k * tmp[(sy * width + x) * c + ch]).sum();
            }
        }
    }
    if interp == Interp::Bicubic {
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    ImageBuffer::new(height, width, c, out)
}

fn taps(src: usize, dst: usize, interp: Interp) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    let clamp = |i: isize| i.clamp(0, src as isize - 1) as usize;
    (0..dst)
        .map(|d| {
            let center = (d as f64 + 0.5) * ratio;
            match interp {
                Interp::Nearest => vec![(clamp(center.floor() as isize), 1.0)],
                Interp::Bilinear => {
                    let pos = center - 0.5;
                    let i0 = pos.floor();
                    let f = pos - i0;
                    let i0 = i0 as isize;
                    vec![(clamp(i0), 1.0 - f), (clamp(i0 + 1), f)]
                }
                Interp::Bicubic => {
                    let pos = center - 0.5;
                    let i0 = pos.floor();
                    let f = pos - i0;
                    let i0 = i0 as isize;
                    (-1..=2)
                        .map(|k| (clamp(i0 + k), keys(k as f64 - f)))
                        .collect()
                }
            }
        })
        .collect()
}

fn keys(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}
