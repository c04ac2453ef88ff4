//! Probability objects passed between pipeline stages: diagonal Gaussians
//! over images, scalar Gaussians, and categorical distributions, plus
//! deterministic seeded sampling and log-density evaluation.
//!
//! Variances are carried in log space (`variance = exp(log_var)`) so they
//! stay positive by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{SeedSpec, Stream};

/// Network log-variance outputs are clamped to this range before
/// exponentiation, keeping variances inside `[e^-15, e^15]`.
pub const LOG_VAR_CLAMP: (f64, f64) = (-15.0, 15.0);

/// Probability floor applied inside entropy logarithms; `0 * log 0 := 0`.
pub const MIN_PROB: f64 = 1e-12;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // 0.5 * ln(2*pi)

/// Gaussian negative log density with the normalization constant included,
/// parametrized by mean and log-variance:
/// `0.5 * (ln 2pi + log_var + (target - mean)^2 * exp(-log_var))`.
#[inline]
fn nll_terms(mean: f64, log_var: f64, target: f64) -> f64 {
    let d = target - mean;
    HALF_LN_TAU + 0.5 * (log_var + d * d * (-log_var).exp())
}

/// A diagonal Gaussian over images: per-pixel mean and log-variance.
///
/// This is the upstream model's output distribution; downstream models
/// consume Monte Carlo samples drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussianImage {
    mean: Image,
    log_var: Image,
}

impl DiagGaussianImage {
    /// Validates shape agreement and that every per-pixel variance
    /// `exp(log_var)` is strictly positive and finite.
    pub fn new(mean: Image, log_var: Image) -> Result<Self> {
        mean.same_shape(&log_var)?;
        if !mean.all_finite() {
            return Err(Error::NonFinite("DiagGaussianImage.mean"));
        }
        for &lv in log_var.iter() {
            let var = lv.exp();
            if !lv.is_finite() || !var.is_finite() || var <= 0.0 {
                return Err(Error::NonFinite("DiagGaussianImage.log_var"));
            }
        }
        Ok(Self { mean, log_var })
    }

    pub fn mean(&self) -> &Image {
        &self.mean
    }

    pub fn log_var(&self) -> &Image {
        &self.log_var
    }

    /// Per-pixel variance image, `exp(log_var)`.
    pub fn variance(&self) -> Image {
        self.log_var.map(f64::exp)
    }

    /// Mean over pixels of the per-pixel variance (the scalar summarized as
    /// `Var[x]` in sweep reports).
    pub fn mean_variance(&self) -> f64 {
        self.log_var.iter().map(|lv| lv.exp()).sum::<f64>() / self.log_var.len() as f64
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    /// Draw one sample `x = mean + sqrt(var) * eps` with per-pixel standard
    /// normal `eps` from the counter-based stream identified by `seed`.
    /// Pixel `p` uses draw index `p`, so the result is bit-identical no
    /// matter how the draw is scheduled.
    pub fn sample(&self, seed: &SeedSpec) -> Image {
        let stream = Stream::new(seed);
        let (h, w) = self.shape();
        let mean = self.mean.as_slice();
        let log_var = self.log_var.as_slice();
        let mut out = Vec::with_capacity(mean.len());
        for p in 0..mean.len() {
            let std = (0.5 * log_var[p]).exp();
            out.push(mean[p] + std * stream.normal(p as u64));
        }
        Image::from_vec(h, w, out).expect("sample preserves shape")
    }
}

/// A scalar Gaussian parametrized by mean and log-variance; the downstream
/// regression head output `(y_hat, delta)` with `Delta = exp(delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarGaussian {
    pub mean: f64,
    pub log_var: f64,
}

impl ScalarGaussian {
    pub fn new(mean: f64, log_var: f64) -> Result<Self> {
        let var = log_var.exp();
        if !mean.is_finite() || !log_var.is_finite() || !var.is_finite() || var <= 0.0 {
            return Err(Error::NonFinite("ScalarGaussian"));
        }
        Ok(Self { mean, log_var })
    }

    pub fn variance(&self) -> f64 {
        self.log_var.exp()
    }
}

/// A categorical distribution over `C >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParam {
                name: "probs",
                reason: format!("need at least 2 classes, got {}", probs.len()),
            });
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam {
                    name: "probs",
                    reason: format!("entry {p} outside [0, 1]"),
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam {
                name: "probs",
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        Ok(Self { probs })
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0 / classes as f64; classes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Shannon entropy in nats. `0 * log 0 := 0`; probabilities are floored
    /// at [`MIN_PROB`] inside the logarithm.
    pub fn entropy(&self) -> f64 {
        entropy_nats(&self.probs)
    }

    /// Index of the most probable class; ties break toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Entropy in nats of a probability vector (not necessarily validated).
pub fn entropy_nats(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.max(MIN_PROB).ln();
        }
    }
    h
}

/// Gaussian negative log likelihood of `target` under `pred`, with the
/// `0.5 * ln 2pi` constant included so the value is a true negative log
/// density.
pub fn gaussian_nll(pred: &ScalarGaussian, target: f64) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::NonFinite("gaussian_nll target"));
    }
    Ok(nll_terms(pred.mean, pred.log_var, target))
}

/// Mean over pixels of the per-pixel Gaussian negative log likelihood.
pub fn image_nll(pred: &DiagGaussianImage, target: &Image) -> Result<f64> {
    pred.mean().same_shape(target)?;
    if !target.all_finite() {
        return Err(Error::NonFinite("image_nll target"));
    }
    let mean = pred.mean().as_slice();
    let log_var = pred.log_var().as_slice();
    let tgt = target.as_slice();
    let total: f64 = (0..tgt.len())
        .map(|p| nll_terms(mean[p], log_var[p], tgt[p]))
        .sum();
    Ok(total / tgt.len() as f64)
}
