//! Monte Carlo marginalization through a downstream model.
//!
//! The upstream stage yields a distribution over images `p(x|z)`. To obtain
//! the pipeline's predictive distribution `p(y|z) = integral p(y|x) p(x|z) dx`
//! we draw `T` samples `x_(t)`, evaluate the downstream model on each, and
//! aggregate the sample outputs. The aggregate carries an exact attribution
//! of the joint uncertainty:
//!
//! - regression: `Var[y] = var_prop + mu_delta` where `var_prop` is the
//!   empirical variance of the sample means (the propagated share) and
//!   `mu_delta` the mean of the downstream variances (the model's own
//!   share);
//! - classification: `H = mutual_info + cond_entropy` where the mutual
//!   information between prediction and sample is the propagated share and
//!   the mean per-sample entropy is the downstream share.
//!
//! Sample `t` always draws from the child stream with `stream_id = t`, and
//! aggregation sums in a canonical value order, so results are bit-identical
//! regardless of execution order, thread count, or sample permutation.

use rayon::prelude::*;

use crate::distributions::{entropy_nats, CategoricalDist, ScalarGaussian};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{SeedSpec, Stream};

/// Anything the downstream model can draw indexed Monte Carlo samples from.
pub trait ImageDistribution: Sync {
    /// Sample number `index` of the ensemble identified by `seed`.
    /// Must be pure: identical `(seed, index)` yields identical images.
    fn draw(&self, seed: &SeedSpec, index: u64) -> Image;
}

impl ImageDistribution for crate::distributions::DiagGaussianImage {
    fn draw(&self, seed: &SeedSpec, index: u64) -> Image {
        self.sample(&seed.fork(index))
    }
}

/// A finite-support distribution over images. Used as a ground-truth
/// upstream whose marginalization is computable by enumeration.
#[derive(Debug, Clone)]
pub struct DiscreteImageDist {
    atoms: Vec<(Image, f64)>,
}

impl DiscreteImageDist {
    pub fn new(atoms: Vec<(Image, f64)>) -> Result<Self> {
        validate_weights(atoms.iter().map(|(_, w)| *w))?;
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(Image, f64)] {
        &self.atoms
    }
}

impl ImageDistribution for DiscreteImageDist {
    fn draw(&self, seed: &SeedSpec, index: u64) -> Image {
        let u = Stream::new(&seed.fork(index)).uniform(0);
        let mut acc = 0.0;
        for (image, w) in &self.atoms {
            acc += w;
            if u < acc {
                return image.clone();
            }
        }
        self.atoms.last().expect("non-empty support").0.clone()
    }
}

fn validate_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    let mut count = 0;
    for w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidParam {
                name: "weights",
                reason: format!("weight {w} invalid"),
            });
        }
        sum += w;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty("discrete support"));
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParam {
            name: "weights",
            reason: format!("weights sum to {sum}, not 1"),
        });
    }
    Ok(())
}

/// Monte Carlo configuration: sample count `T` and the stream the ensemble
/// draws from.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub num_samples: usize,
    pub seed: SeedSpec,
}

impl McConfig {
    pub fn new(num_samples: usize, seed: SeedSpec) -> Self {
        Self { num_samples, seed }
    }
}

/// Joint regression prediction with attributed uncertainty.
///
/// `var_joint == var_prop + mu_delta` holds exactly: the field is computed
/// as that sum and never stored independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionJoint {
    /// Empirical mean of the sample predictions; the estimate of `E[y]`.
    pub mu_hat: f64,
    /// Unbiased empirical variance (denominator `T - 1`) of the sample
    /// predictions; the propagated share of the joint variance.
    pub var_prop: f64,
    /// Mean of the downstream per-sample variances `Delta_(t)`.
    pub mu_delta: f64,
    /// Joint predictive variance `Var[y]`.
    pub var_joint: f64,
}

impl RegressionJoint {
    fn from_parts(mu_hat: f64, var_prop: f64, mu_delta: f64) -> Result<Self> {
        let var_joint = var_prop + mu_delta;
        if !(mu_hat.is_finite() && var_prop.is_finite() && mu_delta.is_finite()) {
            return Err(Error::NonFinite("RegressionJoint"));
        }
        Ok(Self {
            mu_hat,
            var_prop,
            mu_delta,
            var_joint,
        })
    }
}

/// Joint classification prediction with attributed uncertainty.
///
/// `entropy == cond_entropy + mutual_info` holds exactly by construction;
/// all entropies are in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationJoint {
    /// Mean of the per-sample class distributions; the estimate of `E[y]`.
    pub mean_probs: CategoricalDist,
    /// Entropy of `mean_probs`: the joint predictive uncertainty.
    pub entropy: f64,
    /// Mean per-sample entropy: the downstream model's own uncertainty.
    pub cond_entropy: f64,
    /// `entropy - cond_entropy`: the propagated share.
    pub mutual_info: f64,
}

/// Aggregate per-sample regression heads into the joint prediction.
///
/// Needs at least two samples for the unbiased variance. Sums run in a
/// canonical value order, so any permutation of `heads` produces
/// bit-identical output.
pub fn aggregate_regression_samples(heads: &[ScalarGaussian]) -> Result<RegressionJoint> {
    if heads.len() < 2 {
        return Err(Error::InvalidParam {
            name: "num_samples",
            reason: format!("regression aggregation needs T >= 2, got {}", heads.len()),
        });
    }
    for h in heads {
        if !h.mean.is_finite() || !h.log_var.is_finite() || !h.variance().is_finite() {
            return Err(Error::NonFinite("downstream regression output"));
        }
    }
    let t = heads.len() as f64;
    let mu_hat = ordered_sum(heads.iter().map(|h| h.mean)) / t;
    let var_prop = ordered_sum(heads.iter().map(|h| {
        let d = h.mean - mu_hat;
        d * d
    })) / (t - 1.0);
    let mu_delta = ordered_sum(heads.iter().map(|h| h.variance())) / t;
    RegressionJoint::from_parts(mu_hat, var_prop, mu_delta)
}

/// Aggregate per-sample class distributions into the joint prediction.
pub fn aggregate_classification_samples(
    samples: &[CategoricalDist],
) -> Result<ClassificationJoint> {
    let first = samples.first().ok_or(Error::Empty("classification samples"))?;
    let classes = first.num_classes();
    if samples.iter().any(|s| s.num_classes() != classes) {
        return Err(Error::InvalidParam {
            name: "samples",
            reason: "inconsistent class count across Monte Carlo samples".into(),
        });
    }
    let t = samples.len() as f64;
    let mean_probs: Vec<f64> = (0..classes)
        .map(|c| ordered_sum(samples.iter().map(|s| s.probs()[c])) / t)
        .collect();
    let mean_probs = CategoricalDist::new(mean_probs)?;
    let entropy = mean_probs.entropy();
    let cond_entropy = ordered_sum(samples.iter().map(|s| s.entropy())) / t;
    let mutual_info = entropy - cond_entropy;
    Ok(ClassificationJoint {
        mean_probs,
        entropy,
        cond_entropy,
        mutual_info,
    })
}

/// Sum in ascending value order (total order over f64), making the result
/// independent of the caller's element order.
fn ordered_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Marginalize a regression downstream model over the upstream distribution
/// with `T = cfg.num_samples` Monte Carlo samples.
pub fn propagate_regression<D, F>(upstream: &D, f: F, cfg: &McConfig) -> Result<RegressionJoint>
where
    D: ImageDistribution,
    F: Fn(&Image) -> Result<ScalarGaussian> + Sync,
{
    let heads = run_samples(upstream, &f, cfg)?;
    aggregate_regression_samples(&heads)
}

/// [`propagate_regression`] plus the sample covariance between the per-sample
/// predictions and variances. The covariance is diagnostic only: the joint
/// variance estimator absorbs the cross-term rather than reporting it.
pub fn propagate_regression_with_cov<D, F>(
    upstream: &D,
    f: F,
    cfg: &McConfig,
) -> Result<(RegressionJoint, f64)>
where
    D: ImageDistribution,
    F: Fn(&Image) -> Result<ScalarGaussian> + Sync,
{
    let heads = run_samples(upstream, &f, cfg)?;
    let joint = aggregate_regression_samples(&heads)?;
    let t = heads.len() as f64;
    let cov = ordered_sum(
        heads
            .iter()
            .map(|h| (h.mean - joint.mu_hat) * (h.variance() - joint.mu_delta)),
    ) / (t - 1.0);
    Ok((joint, cov))
}

/// Marginalize a classification downstream model over the upstream
/// distribution with `T = cfg.num_samples` Monte Carlo samples.
pub fn propagate_classification<D, F>(
    upstream: &D,
    f: F,
    cfg: &McConfig,
) -> Result<ClassificationJoint>
where
    D: ImageDistribution,
    F: Fn(&Image) -> Result<CategoricalDist> + Sync,
{
    if cfg.num_samples == 0 {
        return Err(Error::Empty("classification samples"));
    }
    let samples = run_samples(upstream, &f, cfg)?;
    aggregate_classification_samples(&samples)
}

/// Draw `T` samples and evaluate the downstream model on each, in parallel.
/// Outputs are collected in sample-index order.
fn run_samples<D, F, O>(upstream: &D, f: &F, cfg: &McConfig) -> Result<Vec<O>>
where
    D: ImageDistribution,
    F: Fn(&Image) -> Result<O> + Sync,
    O: Send,
{
    (0..cfg.num_samples as u64)
        .into_par_iter()
        .map(|t| f(&upstream.draw(&cfg.seed, t)))
        .collect()
}

/// Exact marginalization of a regression model over a finite-support
/// upstream, by enumeration: the law-of-total-variance split
/// `Var[y] = Var[E[y|x]] + E[Var[y|x]]`.
pub fn marginal_oracle_regression<F>(
    support: &[(Image, f64)],
    f: F,
) -> Result<RegressionJoint>
where
    F: Fn(&Image) -> Result<ScalarGaussian>,
{
    validate_support(support)?;
    let heads: Vec<(ScalarGaussian, f64)> = support
        .iter()
        .map(|(image, w)| f(image).map(|h| (h, *w)))
        .collect::<Result<_>>()?;
    let mu_hat: f64 = heads.iter().map(|(h, w)| w * h.mean).sum();
    let var_between: f64 = heads
        .iter()
        .map(|(h, w)| w * (h.mean - mu_hat) * (h.mean - mu_hat))
        .sum();
    let mean_delta: f64 = heads.iter().map(|(h, w)| w * h.variance()).sum();
    RegressionJoint::from_parts(mu_hat, var_between, mean_delta)
}

/// Exact marginalization of a classification model over a finite-support
/// upstream: mixture probabilities and the exact entropy decomposition.
pub fn marginal_oracle_classification<F>(
    support: &[(Image, f64)],
    f: F,
) -> Result<ClassificationJoint>
where
    F: Fn(&Image) -> Result<CategoricalDist>,
{
    validate_support(support)?;
    let outs: Vec<(CategoricalDist, f64)> = support
        .iter()
        .map(|(image, w)| f(image).map(|d| (d, *w)))
        .collect::<Result<_>>()?;
    let classes = outs[0].0.num_classes();
    if outs.iter().any(|(d, _)| d.num_classes() != classes) {
        return Err(Error::InvalidParam {
            name: "support",
            reason: "inconsistent class count across atoms".into(),
        });
    }
    let mut mixture = vec![0.0; classes];
    for (d, w) in &outs {
        for (m, p) in mixture.iter_mut().zip(d.probs()) {
            *m += w * p;
        }
    }
    let entropy = entropy_nats(&mixture);
    let cond_entropy: f64 = outs.iter().map(|(d, w)| w * d.entropy()).sum();
    Ok(ClassificationJoint {
        mean_probs: CategoricalDist::new(mixture)?,
        entropy,
        cond_entropy,
        mutual_info: entropy - cond_entropy,
    })
}

fn validate_support(support: &[(Image, f64)]) -> Result<()> {
    if support.len() > 64 {
        return Err(Error::InvalidParam {
            name: "support",
            reason: format!("at most 64 atoms, got {}", support.len()),
        });
    }
    validate_weights(support.iter().map(|(_, w)| *w))
}
