//! Propagation and attribution of aleatoric uncertainty through two-stage
//! model pipelines.
//!
//! An upstream model maps degraded inputs to a distribution over images
//! (per-pixel mean and variance). A downstream model consumes Monte Carlo
//! samples of that distribution and its sample outputs are aggregated into
//! a joint predictive distribution whose uncertainty splits into a
//! propagated part (from the upstream distribution) and the downstream
//! model's own part: variance terms for regression, entropy terms for
//! classification.
//!
//! Modules:
//! - [`distributions`]: the probability objects passed between stages.
//! - [`propagation`]: Monte Carlo marginalization and uncertainty
//!   attribution.
//! - [`metrics`]: SSIM, task errors, and dataset-level aggregation.
//! - [`models`]: small heteroscedastic networks with hand-derived backprop.
//! - [`training`]: two-stage training loops.
//! - [`synth`]: phantom generation and k-space undersampling simulation.
//! - [`dataset`]: on-disk dataset layout.
//! - [`pipeline`]: end-to-end sweeps and report emission.

pub mod checkpoint;
pub mod dataset;
pub mod distributions;
pub mod error;
pub mod image;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod propagation;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use image::{ComplexImage, Image};
pub use rng::SeedSpec;
