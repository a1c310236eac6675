use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::ImageBuffer;
use crate::rng;

use super::filter::convolve;
use super::jpeg::jpeg_roundtrip;
use super::kernel::{make_kernel, KernelSpec};
use super::resize::{resize_by, Interp};
use super::wiener::wiener_deconvolve;

/// One elementary degradation with fully concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DegradationOp {
    Blur {
        kernel: KernelSpec,
    },
    WienerDeconv {
        kernel: KernelSpec,
        nsr: f64,
    },
    Resize {
        scale: f64,
        interp: Interp,
    },
    GaussianNoise {
        sigma: f64,
        /// Seed of the noise field, so the op replays bit-exactly.
        seed: u64,
    },
    Jpeg {
        quality: u8,
        #[serde(default = "default_true")]
        chroma_420: bool,
    },
}

fn default_true() -> bool {
    true
}

/// Tag used for text annotation; see `annotate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Blur,
    Resize,
    Noise,
    Jpeg,
    Wiener,
}

impl DegradationOp {
    pub fn kind(&self) -> OpKind {
        match self {
            Self::Blur { .. } => OpKind::Blur,
            Self::WienerDeconv { .. } => OpKind::Wiener,
            Self::Resize { .. } => OpKind::Resize,
            Self::GaussianNoise { .. } => OpKind::Noise,
            Self::Jpeg { .. } => OpKind::Jpeg,
        }
    }

    /// Checks parameters without touching an image.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Blur { kernel } => make_kernel(kernel).map(|_| ()),
            Self::WienerDeconv { kernel, nsr } => {
                make_kernel(kernel)?;
                if !(*nsr > 0.0 && nsr.is_finite()) {
                    return Err(invalid("nsr", format!("{nsr} must be positive")));
                }
                Ok(())
            }
            Self::Resize { scale, .. } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("scale", format!("{scale} must be positive")));
                }
                Ok(())
            }
            Self::GaussianNoise { sigma, .. } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma", format!("{sigma} must be nonnegative")));
                }
                Ok(())
            }
            Self::Jpeg { quality, .. } => {
                if !(1..=100).contains(quality) {
                    return Err(invalid("quality", format!("{quality} is outside 1..=100")));
                }
                Ok(())
            }
        }
    }

    /// Applies the op and clamps the result to `[0, 1]`.
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        let out = match self {
            Self::Blur { kernel } => convolve(img, &make_kernel(kernel)?)?,
            Self::WienerDeconv { kernel, nsr } => wiener_deconvolve(img, &make_kernel(kernel)?, *nsr)?,
            Self::Resize { scale, interp } => resize_by(img, *scale, *interp)?,
            Self::GaussianNoise { sigma, seed } => {
                add_gaussian_noise(img, *sigma, &mut rng::stream(*seed, rng::ids::NOISE_FIELD))?
            }
            Self::Jpeg {
                quality,
                chroma_420,
            } => jpeg_roundtrip(img, *quality, *chroma_420)?,
        };
        Ok(out.clamp01())
    }
}

/// `img + sigma * eps`, clamped to `[0, 1]`.
pub fn add_gaussian_noise(img: &ImageBuffer, sigma: f64, rng: &mut impl Rng) -> Result<ImageBuffer> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("{sigma} must be nonnegative")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let (h, w, c) = img.shape();
    let data = img
        .data()
        .iter()
        .map(|v| (v + sigma * rng::normal(rng)).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(h, w, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_sigma_is_bit_exact() {
        let img = crate::patterns::textured(8, 8, 3, 1);
        assert_eq!(add_gaussian_noise(&img, 0.0, &mut stream(1, 1)).unwrap(), img);
        assert!(add_gaussian_noise(&img, -0.1, &mut stream(1, 1)).is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let img = ImageBuffer::filled(8, 8, 3, 0.5).unwrap();
        let a = add_gaussian_noise(&img, 0.05, &mut stream(3, 1)).unwrap();
        let b = add_gaussian_noise(&img, 0.05, &mut stream(3, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_std_on_mid_gray() {
        let img = ImageBuffer::filled(1, 100_000, 1, 0.5).unwrap();
        let out = add_gaussian_noise(&img, 0.05, &mut stream(12, 0)).unwrap();
        let n = out.len() as f64;
        let mean = out.data().iter().sum::<f64>() / n;
        let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 0.05).abs() < 0.02 * 0.05, "{}", var.sqrt());
    }

    #[test]
    fn op_json_tags() {
        let op = DegradationOp::Blur {
            kernel: KernelSpec::Motion { length: 5.0, angle: 10.0 },
        };
        let s = serde_json::to_string(&op).unwrap();
        assert_eq!(s, r#"{"op":"blur","kernel":{"type":"motion","length":5.0,"angle":10.0}}"#);
        let jpeg: DegradationOp = serde_json::from_str(r#"{"op":"jpeg","quality":70}"#).unwrap();
        assert_eq!(jpeg, DegradationOp::Jpeg { quality: 70, chroma_420: true });
    }
}
