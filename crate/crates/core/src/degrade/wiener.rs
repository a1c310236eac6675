use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::image::ImageBuffer;

use super::kernel::Kernel;

type C64 = Complex<f64>;

/// Frequency-domain Wiener filter `conj(K) Y / (|K|^2 + nsr)` per channel.
///
/// Each plane is mirrored to `2h x 2w` before the transform so the implied
/// periodic signal has no seams at the image border; the kernel is
/// zero-padded with its center moved to the origin. Output is clamped to `[0, 1]`.
pub fn wiener_deconvolve(img: &ImageBuffer, kernel: &Kernel, nsr: f64) -> Result<ImageBuffer> {
    if !(nsr > 0.0 && nsr.is_finite()) {
        return Err(invalid("nsr", format!("{nsr} must be positive")));
    }
    if kernel.weights().iter().all(|w| *w == 0.0) {
        return Err(invalid("kernel", "all-zero kernel"));
    }
    let (h, w, c) = img.shape();
    let (eh, ew) = (2 * h, 2 * w);
    let mut fft = Fft2::new(eh, ew);

    let mut spectrum = vec![C64::new(0.0, 0.0); eh * ew];
    let r = kernel.radius() as isize;
    for ky in 0..kernel.size() {
        for kx in 0..kernel.size() {
            let y = (ky as isize - r).rem_euclid(eh as isize) as usize;
            let x = (kx as isize - r).rem_euclid(ew as isize) as usize;
            spectrum[y * ew + x].re += kernel.at(ky, kx);
        }
    }
    fft.forward(&mut spectrum);
    let filter: Vec<C64> = spectrum
        .iter()
        .map(|k| k.conj() / (k.norm_sqr() + nsr))
        .collect();

    let mirror = |i: usize, n: usize| if i < n { i } else { 2 * n - 1 - i };
    let scale = 1.0 / (eh * ew) as f64;
    let mut planes = Vec::with_capacity(c);
    for ch in 0..c {
        let plane = img.plane(ch);
        let mut buf: Vec<C64> = (0..eh * ew)
            .map(|i| C64::new(plane[mirror(i / ew, h) * w + mirror(i % ew, w)], 0.0))
            .collect();
        fft.forward(&mut buf);
        for (b, f) in buf.iter_mut().zip(&filter) {
            *b *= f;
        }
        fft.inverse(&mut buf);
        planes.push(
            (0..h * w)
                .map(|i| (buf[(i / w) * ew + i % w].re * scale).clamp(0.0, 1.0))
                .collect::<Vec<f64>>(),
        );
    }
    ImageBuffer::from_planes(h, w, &planes)
}

/// Unnormalized 2-D FFT over a row-major `h x w` grid.
pub(crate) struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    row_inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
    col_fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    col_inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
    column: Vec<C64>,
}

impl Fft2 {
    pub(crate) fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
            column: vec![C64::new(0.0, 0.0); h],
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [C64]) {
        let (row, col) = (self.row_fwd.clone(), self.col_fwd.clone());
        self.run(data, &*row, &*col);
    }

    pub(crate) fn inverse(&mut self, data: &mut [C64]) {
        let (row, col) = (self.row_inv.clone(), self.col_inv.clone());
        self.run(data, &*row, &*col);
    }

    fn run(&mut self, data: &mut [C64], row: &dyn rustfft::Fft<f64>, col: &dyn rustfft::Fft<f64>) {
        for r in data.chunks_exact_mut(self.w) {
            row.process(r);
        }
        for x in 0..self.w {
            for y in 0..self.h {
                self.column[y] = data[y * self.w + x];
            }
            col.process(&mut self.column);
            for y in 0..self.h {
                data[y * self.w + x] = self.column[y];
            }
        }
    }
}
