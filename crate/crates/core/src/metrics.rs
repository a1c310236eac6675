//! Full-reference distortion metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::ImageBuffer;

/// Largest PSNR written to tabular reports; identical images score `+inf`.
pub const PSNR_TABLE_CAP: f64 = 99.99;

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)`; `f64::INFINITY` when the images are identical.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

pub fn psnr_for_table(db: f64) -> f64 {
    db.min(PSNR_TABLE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window_size: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn window_1d(&self) -> Vec<f64> {
        let r = (self.window_size / 2) as f64;
        let taps: Vec<f64> = (0..self.window_size)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.window_sigma * self.window_sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.window_size.is_multiple_of(2) {
            return Err(invalid("window_size", "must be odd"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(invalid("k1/k2", "must be positive"));
        }
        if !(self.window_sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(invalid("window", "sigma and dynamic range must be positive"));
        }
        Ok(())
    }
}

/// Mean SSIM over all fully-contained windows of the BT.601 luma plane.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, params: &SsimParams) -> Result<f64> {
    a.check_same_shape(b)?;
    params.validate()?;
    let (h, w) = (a.height(), a.width());
    let n = params.window_size;
    if h < n || w < n {
        return Err(invalid(
            "image",
            format!("{h}x{w} is smaller than the {n}x{n} window"),
        ));
    }
    let la = a.luma();
    let lb = b.luma();
    let taps = params.window_1d();
    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(&la, h, w, &taps);
    let mu_b = filter_valid(&lb, h, w, &taps);
    let e_aa = filter_valid(&aa, h, w, &taps);
    let e_bb = filter_valid(&bb, h, w, &taps);
    let e_ab = filter_valid(&ab, h, w, &taps);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            ssim_from_moments(
                mu_a[i],
                mu_b[i],
                e_aa[i] - mu_a[i] * mu_a[i],
                e_bb[i] - mu_b[i] * mu_b[i],
                e_ab[i] - mu_a[i] * mu_b[i],
                c1,
                c2,
            )
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[inline]
fn ssim_from_moments(
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Separable correlation keeping only positions where the window fits.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + n]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, k)| k * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}
