//! Synthetic test images: gradients, edges, smooth bumps and photo-like texture.

use std::f64::consts::TAU;

use rand::Rng;

use crate::image::ImageBuffer;
use crate::rng;

pub fn gradient(height: usize, width: usize, channels: usize) -> ImageBuffer {
    ImageBuffer::from_fn(height, width, channels, |y, x, c| {
        let u = x as f64 / width.max(2) as f64;
        let v = y as f64 / height.max(2) as f64;
        0.1 + 0.5 * u + 0.25 * v + 0.05 * c as f64
    })
    .expect("valid dims")
}

/// Vertical edge at column `width / 2`, `low` on the left.
pub fn step_edge(height: usize, width: usize, low: f64, high: f64) -> ImageBuffer {
    ImageBuffer::from_fn(height, width, 1, |_, x, _| if x < width / 2 { low } else { high })
        .expect("valid dims")
}

/// Gaussian bumps on a flat background that stays flat near the borders.
pub fn blobs(height: usize, width: usize, channels: usize) -> ImageBuffer {
    let centers = [(0.35, 0.3, 0.35), (0.6, 0.65, -0.25), (0.45, 0.7, 0.2)];
    let spread = width.min(height) as f64 / 12.0;
    ImageBuffer::from_fn(height, width, channels, |y, x, c| {
        let mut v = 0.45 + 0.03 * c as f64;
        for &(cy, cx, amp) in &centers {
            let dy = y as f64 - cy * height as f64;
            let dx = x as f64 - cx * width as f64;
            v += amp * (-(dx * dx + dy * dy) / (2.0 * spread * spread)).exp();
        }
        v
    })
    .expect("valid dims")
}

/// Deterministic photo-like content: shaded regions, hard edges and
/// oriented fine texture, kept inside `[0.05, 0.95]`.
pub fn textured(height: usize, width: usize, channels: usize, seed: u64) -> ImageBuffer {
    let mut r = rng::stream(seed, 0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|i| {
            let freq = if i < 3 {
                r.random_range(0.01..0.05)
            } else {
                r.random_range(0.12..0.3)
            };
            let angle = r.random_range(0.0..TAU);
            let phase = r.random_range(0.0..TAU);
            let amp = if i < 3 { 0.12 } else { 0.05 };
            (freq * angle.cos(), freq * angle.sin(), phase, amp)
        })
        .collect();
    let disc = (
        r.random_range(0.3..0.7) * height as f64,
        r.random_range(0.3..0.7) * width as f64,
        r.random_range(0.15..0.3) * height.min(width) as f64,
    );
    let tint: Vec<f64> = (0..channels).map(|_| r.random_range(-0.08..0.08)).collect();
    ImageBuffer::from_fn(height, width, channels, |y, x, c| {
        let (yf, xf) = (y as f64, x as f64);
        let mut v = 0.5 + tint[c];
        for &(fx, fy, phase, amp) in &waves {
            v += amp * (TAU * (fx * xf + fy * yf) + phase).sin();
        }
        let (dy, dx) = (yf - disc.0, xf - disc.1);
        if (dx * dx + dy * dy).sqrt() < disc.2 {
            v += 0.15;
        }
        if x > width * 3 / 4 {
            v -= 0.1;
        }
        v.clamp(0.05, 0.95)
    })
    .expect("valid dims")
}
