use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{ColorType, DynamicImage, ImageReader};
use wildsde::ImageBuffer;

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().expect("listed files have names").to_string_lossy().into_owned()
}

/// Decodes to `[0, 1]` floats. Gray inputs stay single-channel; alpha is dropped.
pub fn read_png(path: &Path) -> Result<ImageBuffer> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .with_context(|| format!("decoding {}", path.display()))?;
    let gray = matches!(
        img.color(),
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = if gray {
        (1, DynamicImage::to_luma8(&img).into_raw())
    } else {
        (3, img.to_rgb8().into_raw())
    };
    Ok(ImageBuffer::new(
        h,
        w,
        channels,
        bytes.into_iter().map(|b| b as f64 / 255.0).collect(),
    )?)
}

pub fn to_bytes(img: &ImageBuffer) -> Vec<u8> {
    img.data()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn write_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    let color = match img.channels() {
        1 => ColorType::L8,
        3 => ColorType::Rgb8,
        c => bail!("cannot write {c}-channel image"),
    };
    image::save_buffer(
        path,
        &to_bytes(img),
        img.width() as u32,
        img.height() as u32,
        color,
    )
    .with_context(|| format!("writing {}", path.display()))
}

/// Center crop to at most `size x size`.
pub fn center_crop(img: &ImageBuffer, size: usize) -> ImageBuffer {
    let (h, w, c) = img.shape();
    let (ch, cw) = (h.min(size), w.min(size));
    let (oy, ox) = ((h - ch) / 2, (w - cw) / 2);
    ImageBuffer::from_fn(ch, cw, c, |y, x, k| img.get(y + oy, x + ox, k)).expect("crop of valid image")
}

/// Formats a dB value for CSV, writing infinities as `inf`.
pub fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}
