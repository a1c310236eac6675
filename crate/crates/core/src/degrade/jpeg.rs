//! Baseline JPEG quantization loss without entropy coding.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::image::ImageBuffer;

#[rustfmt::skip]
const LUMA_QT: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[rustfmt::skip]
const CHROMA_QT: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// libjpeg quality scaling of a base table, entries clamped to `[1, 255]`.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> Result<[f64; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(invalid("quality", format!("{quality} is outside 1..=100")));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    Ok(out)
}

pub fn luma_table(quality: u8) -> Result<[f64; 64]> {
    scaled_table(&LUMA_QT, quality)
}

pub fn chroma_table(quality: u8) -> Result<[f64; 64]> {
    scaled_table(&CHROMA_QT, quality)
}

/// Encodes and decodes through YCbCr (BT.601 full range), optional 4:2:0
/// chroma subsampling, 8x8 DCT and quantization. Planes whose sides are not
/// multiples of 8 are edge-replicated to full blocks and cropped afterwards.
pub fn jpeg_roundtrip(img: &ImageBuffer, quality: u8, chroma_420: bool) -> Result<ImageBuffer> {
    let luma_q = luma_table(quality)?;
    let chroma_q = chroma_table(quality)?;
    let (h, w, c) = img.shape();

    if c == 1 {
        let y: Vec<f64> = img.data().iter().map(|v| v * 255.0).collect();
        let y = code_plane(&y, h, w, &luma_q);
        return ImageBuffer::new(h, w, 1, y.into_iter().map(|v| (v / 255.0).clamp(0.0, 1.0)).collect());
    }

    let n = h * w;
    let (mut yp, mut cb, mut cr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        let (r, g, b) = (px[0] * 255.0, px[1] * 255.0, px[2] * 255.0);
        yp[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        cb[i] = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
        cr[i] = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    }
    let yp = code_plane(&yp, h, w, &luma_q);
    let (cb, cr) = if chroma_420 {
        let (hh, hw) = (h.div_ceil(2), w.div_ceil(2));
        let cb = code_plane(&downsample2(&cb, h, w), hh, hw, &chroma_q);
        let cr = code_plane(&downsample2(&cr, h, w), hh, hw, &chroma_q);
        (upsample2(&cb, hh, hw, h, w), upsample2(&cr, hh, hw, h, w))
    } else {
        (code_plane(&cb, h, w, &chroma_q), code_plane(&cr, h, w, &chroma_q))
    };

    let mut out = Vec::with_capacity(n * 3);
    for i in 0..n {
        let (y, u, v) = (yp[i], cb[i] - 128.0, cr[i] - 128.0);
        let r = y + 1.402 * v;
        let g = y - 0.344_136 * u - 0.714_136 * v;
        let b = y + 1.772 * u;
        out.extend([r, g, b].map(|s| (s / 255.0).clamp(0.0, 1.0)));
    }
    ImageBuffer::new(h, w, 3, out)
}

/// Quantizes one plane on the 0..255 scale block by block.
fn code_plane(plane: &[f64], h: usize, w: usize, table: &[f64; 64]) -> Vec<f64> {
    let (ph, pw) = (h.div_ceil(8) * 8, w.div_ceil(8) * 8);
    let basis = dct_basis();
    let mut out = vec![0.0; h * w];
    let mut block = [0.0; 64];
    for by in (0..ph).step_by(8) {
        for bx in (0..pw).step_by(8) {
            for y in 0..8 {
                let sy = (by + y).min(h - 1);
                for x in 0..8 {
                    let sx = (bx + x).min(w - 1);
                    block[y * 8 + x] = plane[sy * w + sx] - 128.0;
                }
            }
            let mut coef = dct8x8(&block, basis);
            for (c, q) in coef.iter_mut().zip(table) {
                *c = (*c / q).round() * q;
            }
            let rec = idct8x8(&coef, basis);
            for y in 0..8 {
                for x in 0..8 {
                    let (oy, ox) = (by + y, bx + x);
                    if oy < h && ox < w {
                        out[oy * w + ox] = rec[y * 8 + x] + 128.0;
                    }
                }
            }
        }
    }
    out
}

/// Orthonormal DCT-II basis: `basis[u * 8 + x] = C(u) cos((2x + 1) u pi / 16)`.
fn dct_basis() -> &'static [f64; 64] {
    static BASIS: OnceLock<[f64; 64]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [0.0; 64];
        for u in 0..8 {
            let cu = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            for x in 0..8 {
                b[u * 8 + x] = cu * (((2 * x + 1) * u) as f64 * PI / 16.0).cos();
            }
        }
        b
    })
}

fn dct8x8(block: &[f64; 64], basis: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| basis[u * 8 + x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| basis[v * 8 + y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct8x8(coef: &[f64; 64], basis: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| basis[u * 8 + x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| basis[v * 8 + y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// 2x2 box average; odd edges average the available samples.
fn downsample2(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (hh, hw) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = vec![0.0; hh * hw];
    for y in 0..hh {
        for x in 0..hw {
            let mut acc = 0.0;
            let mut n = 0.0;
            for sy in 2 * y..(2 * y + 2).min(h) {
                for sx in 2 * x..(2 * x + 2).min(w) {
                    acc += plane[sy * w + sx];
                    n += 1.0;
                }
            }
            out[y * hw + x] = acc / n;
        }
    }
    out
}

fn upsample2(plane: &[f64], hh: usize, hw: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = plane[(y / 2).min(hh - 1) * hw + (x / 2).min(hw - 1)];
        }
    }
    out
}
