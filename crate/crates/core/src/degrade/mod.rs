//! Synthetic "wild" degradations: blur kernels, Wiener ringing, resizing,
//! Gaussian noise, JPEG quantization, and the shuffled multi-phase pipeline.

mod filter;
mod jpeg;
mod kernel;
mod ops;
mod pipeline;
mod resize;
mod wiener;

pub use filter::convolve;
pub use jpeg::{chroma_table, jpeg_roundtrip, luma_table};
pub use kernel::{make_kernel, Kernel, KernelSpec};
pub use ops::{add_gaussian_noise, DegradationOp, OpKind};
pub use pipeline::{
    apply_pipeline, apply_plan, replay, sample_phase_plan, BlurCandidate, BlurKind, Dims,
    JpegCandidate, LogEntry, NoiseCandidate, OpLog, PhaseConfig, PipelineConfig, Plan, Range,
    ResizeBack, ResizeCandidate, WienerConfig, OPLOG_SCHEMA_VERSION,
};
pub use resize::{resize, resize_by, scaled_dims, Interp};
pub use wiener::wiener_deconvolve;
