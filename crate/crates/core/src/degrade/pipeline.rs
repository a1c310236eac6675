//! Randomized multi-phase degradation with shuffled order inside each phase.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::ImageBuffer;

use super::kernel::KernelSpec;
use super::ops::DegradationOp;
use super::resize::{resize, Interp};

pub const OPLOG_SCHEMA_VERSION: u32 = 1;

/// Closed interval `[lo, hi]` written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(invalid(name, format!("[{}, {}] is not a valid range", self.0, self.1)));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..self.1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurKind {
    Gaussian,
    Defocus,
    Box,
    Motion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlurCandidate {
    pub probability: f64,
    pub kinds: Vec<BlurKind>,
    pub gaussian_sigma: Range,
    pub defocus_radius: Range,
    pub box_sizes: Vec<usize>,
    pub motion_length: Range,
    /// Degrees.
    pub motion_angle: Range,
}

impl Default for BlurCandidate {
    fn default() -> Self {
        Self {
            probability: 0.5,
            kinds: vec![BlurKind::Gaussian, BlurKind::Defocus, BlurKind::Box, BlurKind::Motion],
            gaussian_sigma: Range(0.2, 3.0),
            defocus_radius: Range(1.0, 4.0),
            box_sizes: vec![3, 5, 7],
            motion_length: Range(3.0, 15.0),
            motion_angle: Range(0.0, 180.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResizeCandidate {
    pub probability: f64,
    pub scale: Range,
    pub interps: Vec<Interp>,
}

impl Default for ResizeCandidate {
    fn default() -> Self {
        Self {
            probability: 0.5,
            scale: Range(0.5, 1.5),
            interps: vec![Interp::Nearest, Interp::Bilinear, Interp::Bicubic],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseCandidate {
    pub probability: f64,
    pub sigma: Range,
}

impl Default for NoiseCandidate {
    fn default() -> Self {
        Self {
            probability: 0.5,
            sigma: Range(0.005, 0.06),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JpegCandidate {
    pub probability: f64,
    /// Inclusive quality bounds.
    pub quality: (u8, u8),
}

impl Default for JpegCandidate {
    fn default() -> Self {
        Self {
            probability: 0.5,
            quality: (40, 95),
        }
    }
}

/// Candidate ops of one phase, in declared order blur, resize, noise, jpeg.
/// A missing candidate never fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub blur: Option<BlurCandidate>,
    pub resize: Option<ResizeCandidate>,
    pub noise: Option<NoiseCandidate>,
    pub jpeg: Option<JpegCandidate>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            blur: Some(BlurCandidate::default()),
            resize: Some(ResizeCandidate::default()),
            noise: Some(NoiseCandidate::default()),
            jpeg: Some(JpegCandidate::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerConfig {
    /// Chance that a sampled blur is followed by Wiener deconvolution.
    pub probability: f64,
    pub nsr: Range,
    /// Deconvolve with an independently drawn kernel of the same family
    /// instead of the blur's own kernel.
    pub mismatched_kernel: bool,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            probability: 0.3,
            nsr: Range(1e-4, 1e-2),
            mismatched_kernel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub phases: Vec<PhaseConfig>,
    pub shuffle_within_phase: bool,
    pub final_resize_back: bool,
    pub final_resize_interps: Vec<Interp>,
    pub wiener: WienerConfig,
    pub jpeg_chroma_420: bool,
    /// Set from the run's master seed, not from the pipeline section.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            phases: vec![PhaseConfig::default(); 3],
            shuffle_within_phase: true,
            final_resize_back: true,
            final_resize_interps: vec![Interp::Bilinear, Interp::Bicubic],
            wiener: WienerConfig::default(),
            jpeg_chroma_420: true,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Same phase structure with every inclusion probability set to `p`.
    pub fn with_probability(mut self, p: f64) -> Self {
        for phase in &mut self.phases {
            if let Some(c) = phase.blur.as_mut() {
                c.probability = p;
            }
            if let Some(c) = phase.resize.as_mut() {
                c.probability = p;
            }
            if let Some(c) = phase.noise.as_mut() {
                c.probability = p;
            }
            if let Some(c) = phase.jpeg.as_mut() {
                c.probability = p;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &'static str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(invalid(name, format!("{p} is not a probability")))
            }
        };
        for phase in &self.phases {
            if let Some(b) = &phase.blur {
                prob("blur.probability", b.probability)?;
                if b.kinds.is_empty() {
                    return Err(invalid("blur.kinds", "empty"));
                }
                b.gaussian_sigma.validate("blur.gaussian_sigma")?;
                b.defocus_radius.validate("blur.defocus_radius")?;
                b.motion_length.validate("blur.motion_length")?;
                b.motion_angle.validate("blur.motion_angle")?;
                if b.gaussian_sigma.0 <= 0.0 || b.defocus_radius.0 <= 0.0 || b.motion_length.0 <= 0.0
                {
                    return Err(invalid("blur", "extents must be positive"));
                }
                if b.kinds.contains(&BlurKind::Box)
                    && (b.box_sizes.is_empty() || b.box_sizes.iter().any(|s| s % 2 == 0))
                {
                    return Err(invalid("blur.box_sizes", "must be non-empty and odd"));
                }
            }
            if let Some(r) = &phase.resize {
                prob("resize.probability", r.probability)?;
                r.scale.validate("resize.scale")?;
                if r.scale.0 <= 0.0 {
                    return Err(invalid("resize.scale", "must be positive"));
                }
                if r.interps.is_empty() {
                    return Err(invalid("resize.interps", "empty"));
                }
            }
            if let Some(n) = &phase.noise {
                prob("noise.probability", n.probability)?;
                n.sigma.validate("noise.sigma")?;
                if n.sigma.0 < 0.0 {
                    return Err(invalid("noise.sigma", "must be nonnegative"));
                }
            }
            if let Some(j) = &phase.jpeg {
                prob("jpeg.probability", j.probability)?;
                let (lo, hi) = j.quality;
                if !(1 <= lo && lo <= hi && hi <= 100) {
                    return Err(invalid("jpeg.quality", format!("[{lo}, {hi}] not within 1..=100")));
                }
            }
        }
        prob("wiener.probability", self.wiener.probability)?;
        self.wiener.nsr.validate("wiener.nsr")?;
        if self.wiener.nsr.0 <= 0.0 {
            return Err(invalid("wiener.nsr", "must be positive"));
        }
        if self.final_resize_back && self.final_resize_interps.is_empty() {
            return Err(invalid("final_resize_interps", "empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub phase: usize,
    #[serde(flatten)]
    pub op: DegradationOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeBack {
    pub height: usize,
    pub width: usize,
    pub interp: Interp,
}

/// Sampled, image-independent sequence of ops.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub entries: Vec<LogEntry>,
    /// Interpolation for the final resize-back, when enabled.
    pub resize_back_interp: Option<Interp>,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Everything applied to one image, replayable with [`replay`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpLog {
    pub schema_version: u32,
    pub original: Dims,
    #[serde(rename = "final")]
    pub final_dims: Dims,
    pub entries: Vec<LogEntry>,
    /// Resize to the original dims after the phases; absent when the
    /// phases left the dims unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resize_back: Option<ResizeBack>,
}

impl OpLog {
    pub fn ops(&self) -> impl Iterator<Item = &DegradationOp> {
        self.entries.iter().map(|e| &e.op)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("op log serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let log: OpLog = serde_json::from_str(s).map_err(|e| Error::MalformedLog(e.to_string()))?;
        if log.schema_version != OPLOG_SCHEMA_VERSION {
            return Err(Error::MalformedLog(format!(
                "unsupported schema version {}",
                log.schema_version
            )));
        }
        Ok(log)
    }
}

pub fn sample_phase_plan(config: &PipelineConfig, rng: &mut impl Rng) -> Result<Plan> {
    config.validate()?;
    let mut entries = Vec::new();
    for (phase, pc) in config.phases.iter().enumerate() {
        // Blur and its optional deconvolution move as one unit when shuffled.
        let mut units: Vec<Vec<DegradationOp>> = Vec::new();
        if let Some(b) = &pc.blur {
            if fires(rng, b.probability) {
                let kernel = sample_kernel(b, rng);
                let mut unit = vec![DegradationOp::Blur { kernel }];
                if fires(rng, config.wiener.probability) {
                    let deconv_kernel = if config.wiener.mismatched_kernel {
                        sample_kernel_of(b, kernel_kind(&kernel), rng)
                    } else {
                        kernel
                    };
                    unit.push(DegradationOp::WienerDeconv {
                        kernel: deconv_kernel,
                        nsr: config.wiener.nsr.sample(rng),
                    });
                }
                units.push(unit);
            }
        }
        if let Some(r) = &pc.resize {
            if fires(rng, r.probability) {
                units.push(vec![DegradationOp::Resize {
                    scale: r.scale.sample(rng),
                    interp: *r.interps.choose(rng).expect("validated non-empty"),
                }]);
            }
        }
        if let Some(n) = &pc.noise {
            if fires(rng, n.probability) {
                units.push(vec![DegradationOp::GaussianNoise {
                    sigma: n.sigma.sample(rng),
                    seed: rng.random(),
                }]);
            }
        }
        if let Some(j) = &pc.jpeg {
            if fires(rng, j.probability) {
                units.push(vec![DegradationOp::Jpeg {
                    quality: rng.random_range(j.quality.0..=j.quality.1),
                    chroma_420: config.jpeg_chroma_420,
                }]);
            }
        }
        if config.shuffle_within_phase {
            units.shuffle(rng);
        }
        entries.extend(
            units
                .into_iter()
                .flatten()
                .map(|op| LogEntry { phase, op }),
        );
    }
    let resize_back_interp = config
        .final_resize_back
        .then(|| *config.final_resize_interps.choose(rng).expect("validated non-empty"));
    Ok(Plan {
        entries,
        resize_back_interp,
    })
}

fn fires(rng: &mut impl Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn kernel_kind(k: &KernelSpec) -> BlurKind {
    match k {
        KernelSpec::Gaussian { .. } => BlurKind::Gaussian,
        KernelSpec::Defocus { .. } => BlurKind::Defocus,
        KernelSpec::Box { .. } => BlurKind::Box,
        KernelSpec::Motion { .. } => BlurKind::Motion,
    }
}

fn sample_kernel(b: &BlurCandidate, rng: &mut impl Rng) -> KernelSpec {
    let kind = *b.kinds.choose(rng).expect("validated non-empty");
    sample_kernel_of(b, kind, rng)
}

fn sample_kernel_of(b: &BlurCandidate, kind: BlurKind, rng: &mut impl Rng) -> KernelSpec {
    match kind {
        BlurKind::Gaussian => KernelSpec::Gaussian {
            sigma: b.gaussian_sigma.sample(rng),
            size: None,
        },
        BlurKind::Defocus => KernelSpec::Defocus {
            radius: b.defocus_radius.sample(rng),
        },
        BlurKind::Box => KernelSpec::Box {
            size: *b.box_sizes.choose(rng).expect("validated non-empty"),
        },
        BlurKind::Motion => KernelSpec::Motion {
            length: b.motion_length.sample(rng),
            angle: b.motion_angle.sample(rng),
        },
    }
}

/// Samples a plan, applies it and returns the degraded image with its log.
pub fn apply_pipeline(
    img: &ImageBuffer,
    config: &PipelineConfig,
    rng: &mut impl Rng,
) -> Result<(ImageBuffer, OpLog)> {
    let plan = sample_phase_plan(config, rng)?;
    apply_plan(img, &plan)
}

pub fn apply_plan(img: &ImageBuffer, plan: &Plan) -> Result<(ImageBuffer, OpLog)> {
    let original = Dims {
        height: img.height(),
        width: img.width(),
    };
    let mut cur = img.clone();
    for entry in &plan.entries {
        cur = entry.op.apply(&cur)?;
    }
    let mut resize_back = None;
    if let Some(interp) = plan.resize_back_interp {
        if (cur.height(), cur.width()) != (original.height, original.width) {
            let rb = ResizeBack {
                height: original.height,
                width: original.width,
                interp,
            };
            cur = apply_resize_back(&cur, &rb)?;
            resize_back = Some(rb);
        }
    }
    let log = OpLog {
        schema_version: OPLOG_SCHEMA_VERSION,
        original,
        final_dims: Dims {
            height: cur.height(),
            width: cur.width(),
        },
        entries: plan.entries.clone(),
        resize_back,
    };
    Ok((cur, log))
}

fn apply_resize_back(img: &ImageBuffer, rb: &ResizeBack) -> Result<ImageBuffer> {
    Ok(resize(img, rb.height, rb.width, rb.interp)?.clamp01())
}

/// Re-applies a logged pipeline. The image must have the log's original dims.
pub fn replay(img: &ImageBuffer, log: &OpLog) -> Result<ImageBuffer> {
    if log.schema_version != OPLOG_SCHEMA_VERSION {
        return Err(Error::MalformedLog(format!(
            "unsupported schema version {}",
            log.schema_version
        )));
    }
    if (img.height(), img.width()) != (log.original.height, log.original.width) {
        return Err(Error::MalformedLog(format!(
            "log expects a {}x{} input, got {}x{}",
            log.original.height,
            log.original.width,
            img.height(),
            img.width()
        )));
    }
    for entry in &log.entries {
        entry
            .op
            .validate()
            .map_err(|e| Error::MalformedLog(e.to_string()))?;
    }
    let mut cur = img.clone();
    for entry in &log.entries {
        cur = entry.op.apply(&cur)?;
    }
    if let Some(rb) = &log.resize_back {
        cur = apply_resize_back(&cur, rb)?;
    }
    if (cur.height(), cur.width()) != (log.final_dims.height, log.final_dims.width) {
        return Err(Error::MalformedLog(format!(
            "replay produced {}x{}, log records {}x{}",
            cur.height(),
            cur.width(),
            log.final_dims.height,
            log.final_dims.width
        )));
    }
    Ok(cur)
}
