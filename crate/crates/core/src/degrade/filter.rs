use crate::error::{Error, Result};
use crate::image::ImageBuffer;

use super::kernel::Kernel;

/// Mirror index without repeating the edge sample (`d c b | a b c d`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Per-channel 2-D correlation with reflect padding; output has the input size.
pub fn convolve(img: &ImageBuffer, kernel: &Kernel) -> Result<ImageBuffer> {
    let (h, w, c) = img.shape();
    if kernel.size() > 2 * h.min(w) {
        return Err(Error::KernelTooLarge {
            kernel: kernel.size(),
            height: h,
            width: w,
        });
    }
    if kernel.size() == 1 {
        return Ok(img.clone());
    }
    let r = kernel.radius() as isize;
    let n = kernel.size();
    let row_idx: Vec<Vec<usize>> = (0..h as isize)
        .map(|y| (0..n as isize).map(|k| reflect(y + k - r, h)).collect())
        .collect();
    let col_idx: Vec<Vec<usize>> = (0..w as isize)
        .map(|x| (0..n as isize).map(|k| reflect(x + k - r, w)).collect())
        .collect();
    let src = img.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (ky, &sy) in row_idx[y].iter().enumerate() {
                    let base = sy * w;
                    for (kx, &sx) in col_idx[x].iter().enumerate() {
                        acc += kernel.at(ky, kx) * src[(base + sx) * c + ch];
                    }
                }
                out[(y * w + x) * c + ch] = acc;
            }
        }
    }
    ImageBuffer::new(h, w, c, out)
}
