//! Mean-reverting SDE restoration toolkit.
//!
//! * [`sde`]: closed-form marginals, reverse-time SDE, optimal posterior
//!   sampling and x0 estimation behind a pluggable [`sde::NoisePredictor`].
//! * [`degrade`]: shuffled multi-phase synthetic degradations with a
//!   replayable [`degrade::OpLog`].
//! * [`annotate`]: degradation text and JSONL dataset records.
//! * [`metrics`]: PSNR and SSIM.
//! * [`verify`]: the named invariant checks behind the `verify` command.

pub mod annotate;
pub mod config;
pub mod degrade;
pub mod error;
pub mod image;
pub mod metrics;
pub mod patterns;
pub mod rng;
pub mod sde;
pub mod verify;

pub use error::{Error, Result};
pub use image::ImageBuffer;
