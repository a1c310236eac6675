use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Blur kernel family and extent. Sizes are full widths in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian {
        sigma: f64,
        /// Defaults to `ceil(6 sigma)` rounded up to odd.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
    },
    Defocus {
        radius: f64,
    },
    Box {
        size: usize,
    },
    Motion {
        length: f64,
        /// Degrees, counter-clockwise from the +x axis.
        angle: f64,
    },
}

/// Square, normalized, odd-sized 2-D kernel stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn from_weights(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) || weights.len() != size * size {
            return Err(invalid("kernel", "must be square with odd side"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("kernel", "weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("kernel", "all-zero kernel"));
        }
        Ok(Self {
            size,
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            weights: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, ky: usize, kx: usize) -> f64 {
        self.weights[ky * self.size + kx]
    }
}

pub fn make_kernel(spec: &KernelSpec) -> Result<Kernel> {
    match *spec {
        KernelSpec::Gaussian { sigma, size } => {
            positive("sigma", sigma)?;
            let size = match size {
                Some(s) => odd("size", s)?,
                None => {
                    let s = (6.0 * sigma).ceil() as usize;
                    s.max(1) | 1
                }
            };
            gaussian(sigma, size)
        }
        KernelSpec::Defocus { radius } => {
            positive("radius", radius)?;
            defocus(radius)
        }
        KernelSpec::Box { size } => {
            let size = odd("size", size)?;
            Kernel::from_weights(size, vec![1.0; size * size])
        }
        KernelSpec::Motion { length, angle } => {
            positive("length", length)?;
            if !angle.is_finite() {
                return Err(invalid("angle", "must be finite"));
            }
            motion(length, angle)
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("{v} must be positive")));
    }
    Ok(())
}

fn odd(name: &'static str, s: usize) -> Result<usize> {
    if s.is_multiple_of(2) {
        return Err(invalid(name, format!("{s} must be odd")));
    }
    Ok(s)
}

fn gaussian(sigma: f64, size: usize) -> Result<Kernel> {
    let r = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let weights = taps
        .iter()
        .flat_map(|a| taps.iter().map(move |b| a * b))
        .collect();
    Kernel::from_weights(size, weights)
}

const SUPERSAMPLE: usize = 8;

/// Disk of the given radius; each cell weighted by its covered area,
/// estimated on an 8x8 subgrid.
fn defocus(radius: f64) -> Result<Kernel> {
    let half = radius.ceil() as usize;
    let size = 2 * half + 1;
    let r2 = radius * radius;
    let mut weights = vec![0.0; size * size];
    for ky in 0..size {
        for kx in 0..size {
            let mut hits = 0usize;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let y = ky as f64 - half as f64 - 0.5 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                    let x = kx as f64 - half as f64 - 0.5 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                    if x * x + y * y <= r2 {
                        hits += 1;
                    }
                }
            }
            weights[ky * size + kx] = hits as f64;
        }
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(Kernel::identity());
    }
    Kernel::from_weights(size, weights)
}

/// Line segment of the given length through the center, rasterized by
/// bilinear splatting of densely spaced points.
fn motion(length: f64, angle_deg: f64) -> Result<Kernel> {
    let half_len = (length - 1.0).max(0.0) / 2.0;
    let half = half_len.ceil() as usize;
    let size = 2 * half + 1;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let samples = ((2.0 * half_len * SUPERSAMPLE as f64).ceil() as usize).max(1);
    let mut weights = vec![0.0; size * size];
    for i in 0..=samples {
        let s = if samples == 0 {
            0.0
        } else {
            -half_len + 2.0 * half_len * i as f64 / samples as f64
        };
        // Image rows grow downward.
        let x = s * cos + half as f64;
        let y = -s * sin + half as f64;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                let w = wy * wx;
                if w <= 0.0 {
                    continue;
                }
                let (yy, xx) = (y0 as usize + dy, x0 as usize + dx);
                if yy < size && xx < size {
                    weights[yy * size + xx] += w;
                }
            }
        }
    }
    Kernel::from_weights(size, weights)
}
