//! Two-stage heteroscedastic training.
//!
//! The upstream reconstructor trains on (degraded input, ground truth)
//! pairs under the image Gaussian NLL. The downstream model trains on
//! Monte Carlo samples drawn from the frozen upstream's output
//! distribution, by default minimizing the NLL of the T-sample aggregated
//! joint distribution (a per-sample averaged loss is available behind
//! `joint_nll = false`).
//!
//! Gradient reduction over samples and batch examples is index-ordered, so
//! a fixed seed yields bit-identical checkpoints at any thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::distributions::{ScalarGaussian, MIN_PROB};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::models::{HeadGrad, Mlp, MlpSpec};
use crate::propagation::ImageDistribution;
use crate::rng::{SeedSpec, Stream};

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Monte Carlo samples per example during downstream training.
    #[serde(default = "default_mc_train")]
    pub mc_samples_train: usize,
    /// Monte Carlo samples during evaluation.
    #[serde(default = "default_mc_eval")]
    pub mc_samples_eval: usize,
    pub seed: u64,
    /// Joint NLL of the aggregated distribution (default) vs the mean of
    /// per-sample NLLs.
    #[serde(default = "default_true")]
    pub joint_nll: bool,
}

fn default_mc_train() -> usize {
    8
}

fn default_mc_eval() -> usize {
    256
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 50,
            optimizer: Optimizer::default(),
            mc_samples_train: default_mc_train(),
            mc_samples_eval: default_mc_eval(),
            seed: 0,
            joint_nll: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "batch size and epochs must be positive".into(),
            ));
        }
        if self.mc_samples_train < 2 {
            return Err(Error::Config(format!(
                "mc_samples_train must be >= 2, got {}",
                self.mc_samples_train
            )));
        }
        if self.mc_samples_eval < 2 {
            return Err(Error::Config(format!(
                "mc_samples_eval must be >= 2, got {}",
                self.mc_samples_eval
            )));
        }
        Ok(())
    }
}

/// First-moment / second-moment optimizer state over the flat parameters.
struct OptState {
    optimizer: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl OptState {
    fn new(optimizer: Optimizer, n: usize) -> Self {
        Self {
            optimizer,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

/// One row of the per-epoch training log.
#[derive(Debug, Clone, Copy)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub wall_ms: u128,
}

/// Serialize an epoch log as the CSV the training commands emit.
pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_nll,val_nll,wall_ms\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.train_nll, row.val_nll, row.wall_ms
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

// ---------------------------------------------------------------------------
// Loss heads: value plus exact head-space gradient.
// ---------------------------------------------------------------------------

/// Image Gaussian NLL (mean over pixels) and its gradient w.r.t. the mean
/// and clamped log-variance outputs.
pub fn image_gaussian_loss(mean: &[f64], log_var: &[f64], target: &[f64]) -> (f64, HeadGrad) {
    let n = target.len() as f64;
    let mut loss = 0.0;
    let mut d_mean = Vec::with_capacity(target.len());
    let mut d_log_var = Vec::with_capacity(target.len());
    for p in 0..target.len() {
        let inv_var = (-log_var[p]).exp();
        let d = target[p] - mean[p];
        loss += HALF_LN_TAU + 0.5 * (log_var[p] + d * d * inv_var);
        d_mean.push((mean[p] - target[p]) * inv_var / n);
        d_log_var.push(0.5 * (1.0 - d * d * inv_var) / n);
    }
    (loss / n, HeadGrad::Gaussian { d_mean, d_log_var })
}

/// Scalar Gaussian NLL and its head gradient.
pub fn scalar_gaussian_loss(mean: f64, log_var: f64, target: f64) -> (f64, HeadGrad) {
    let (loss, grad) = image_gaussian_loss(&[mean], &[log_var], &[target]);
    (loss, grad)
}

/// Cross entropy of one categorical prediction at `label`, with the
/// gradient expressed w.r.t. logits (`p - onehot`).
pub fn cross_entropy_loss(probs: &[f64], label: usize) -> (f64, HeadGrad) {
    let loss = -probs[label].max(MIN_PROB).ln();
    let d_logits = probs
        .iter()
        .enumerate()
        .map(|(c, &p)| p - if c == label { 1.0 } else { 0.0 })
        .collect();
    (loss, HeadGrad::Logits { d_logits })
}

/// NLL of the T-sample aggregated regression distribution
/// `N(mu_hat, var_prop + mu_delta)` at `target`, with per-sample gradients
/// w.r.t. each `(y_hat_t, delta_t)` head pair.
pub fn mc_joint_regression_loss(
    heads: &[(f64, f64)],
    target: f64,
) -> (f64, Vec<(f64, f64)>) {
    let t = heads.len() as f64;
    let mu: f64 = heads.iter().map(|h| h.0).sum::<f64>() / t;
    let var_prop: f64 = heads.iter().map(|h| (h.0 - mu) * (h.0 - mu)).sum::<f64>() / (t - 1.0);
    let mu_delta: f64 = heads.iter().map(|h| h.1.exp()).sum::<f64>() / t;
    let var = var_prop + mu_delta;
    let resid = target - mu;
    let loss = HALF_LN_TAU + 0.5 * (var.ln() + resid * resid / var);
    let d_mu = -resid / var;
    let d_var = 0.5 * (1.0 / var - resid * resid / (var * var));
    let grads = heads
        .iter()
        .map(|&(y_hat, delta)| {
            let d_y = d_mu / t + d_var * 2.0 * (y_hat - mu) / (t - 1.0);
            let d_delta = d_var * delta.exp() / t;
            (d_y, d_delta)
        })
        .collect();
    (loss, grads)
}

/// Cross entropy of the mean class distribution at `label`, with
/// per-sample gradients w.r.t. each sample's probability vector.
pub fn mc_joint_classification_loss(
    probs: &[Vec<f64>],
    label: usize,
) -> (f64, Vec<Vec<f64>>) {
    let t = probs.len() as f64;
    let classes = probs[0].len();
    let mut mean = vec![0.0; classes];
    for p in probs {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v / t;
        }
    }
    let m_label = mean[label].max(MIN_PROB);
    let loss = -m_label.ln();
    let grads = probs
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(c, _)| if c == label { -1.0 / (t * m_label) } else { 0.0 })
                .collect()
        })
        .collect();
    (loss, grads)
}

// ---------------------------------------------------------------------------
// Per-example losses with full parameter gradients (shared by the training
// loop and by gradient-check tests).
// ---------------------------------------------------------------------------

/// Loss and parameter gradient of the downstream regression objective on a
/// fixed set of Monte Carlo input samples.
pub fn mc_regression_loss_and_grad(
    model: &Mlp,
    samples: &[Image],
    target: f64,
    joint: bool,
) -> Result<(f64, Vec<f64>)> {
    let traces: Vec<_> = samples
        .iter()
        .map(|x| model.forward_trace(x.as_slice()))
        .collect::<Result<_>>()?;
    let heads: Vec<(f64, f64)> = traces
        .iter()
        .map(|tr| (tr.main()[0], tr.log_var().expect("scalar head")[0]))
        .collect();
    let mut grad = vec![0.0; model.num_params()];
    let loss = if joint {
        let (loss, head_grads) = mc_joint_regression_loss(&heads, target);
        for (tr, (d_y, d_delta)) in traces.iter().zip(head_grads) {
            model.backward(
                tr,
                &HeadGrad::Gaussian {
                    d_mean: vec![d_y],
                    d_log_var: vec![d_delta],
                },
                &mut grad,
            )?;
        }
        loss
    } else {
        let t = heads.len() as f64;
        let mut total = 0.0;
        for (tr, &(y_hat, delta)) in traces.iter().zip(&heads) {
            let (loss, head_grad) = scalar_gaussian_loss(y_hat, delta, target);
            total += loss / t;
            let scaled = match head_grad {
                HeadGrad::Gaussian { d_mean, d_log_var } => HeadGrad::Gaussian {
                    d_mean: d_mean.iter().map(|g| g / t).collect(),
                    d_log_var: d_log_var.iter().map(|g| g / t).collect(),
                },
                other => other,
            };
            model.backward(tr, &scaled, &mut grad)?;
        }
        total
    };
    Ok((loss, grad))
}

/// Loss and parameter gradient of the downstream classification objective
/// on a fixed set of Monte Carlo input samples.
pub fn mc_classification_loss_and_grad(
    model: &Mlp,
    samples: &[Image],
    label: usize,
    joint: bool,
) -> Result<(f64, Vec<f64>)> {
    let traces: Vec<_> = samples
        .iter()
        .map(|x| model.forward_trace(x.as_slice()))
        .collect::<Result<_>>()?;
    let probs: Vec<Vec<f64>> = traces
        .iter()
        .map(|tr| tr.probs().expect("softmax head").to_vec())
        .collect();
    let mut grad = vec![0.0; model.num_params()];
    let loss = if joint {
        let (loss, d_probs) = mc_joint_classification_loss(&probs, label);
        for ((tr, p), dp) in traces.iter().zip(&probs).zip(d_probs) {
            let d_logits = crate::models::softmax_backward(p, &dp);
            model.backward(tr, &HeadGrad::Logits { d_logits }, &mut grad)?;
        }
        loss
    } else {
        let t = probs.len() as f64;
        let mut total = 0.0;
        for (tr, p) in traces.iter().zip(&probs) {
            let (loss, head_grad) = cross_entropy_loss(p, label);
            total += loss / t;
            let scaled = match head_grad {
                HeadGrad::Logits { d_logits } => HeadGrad::Logits {
                    d_logits: d_logits.iter().map(|g| g / t).collect(),
                },
                other => other,
            };
            model.backward(tr, &scaled, &mut grad)?;
        }
        total
    };
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// Training loops.
// ---------------------------------------------------------------------------

/// Deterministic Fisher-Yates shuffle keyed by `(seed, epoch)`.
fn shuffled_indices(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let stream = Stream::new(&SeedSpec::new(seed, 0).fork(4).fork(epoch as u64));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (stream.uniform(i as u64) * (i + 1) as f64) as usize;
        idx.swap(i, j.min(i));
    }
    idx
}

fn split_train_val(n: usize) -> (usize, usize) {
    let val = n / 5;
    (n - val, val)
}

fn check_finite(loss: f64, epoch: usize) -> Result<f64> {
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch, loss });
    }
    Ok(loss)
}

/// Train the upstream heteroscedastic reconstructor on
/// (degraded input, ground truth) pairs, minimizing the mean image NLL.
/// The last 20% of the pairs are held out for the validation column.
pub fn train_upstream(
    pairs: &[(Image, Image)],
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("upstream training set"));
    }
    let (n_train, n_val) = split_train_val(pairs.len());
    let mut model = Mlp::init(spec.clone(), &SeedSpec::new(cfg.seed, 0).fork(5))?;
    let mut opt = OptState::new(cfg.optimizer, model.num_params());
    let mut log = Vec::with_capacity(cfg.epochs);

    let example_loss_grad = |model: &Mlp, input: &Image, target: &Image| -> Result<(f64, Vec<f64>)> {
        let trace = model.forward_trace(input.as_slice())?;
        let (loss, head_grad) = image_gaussian_loss(
            trace.main(),
            trace.log_var().expect("image head"),
            target.as_slice(),
        );
        let mut grad = vec![0.0; model.num_params()];
        model.backward(&trace, &head_grad, &mut grad)?;
        Ok((loss, grad))
    };

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let order = shuffled_indices(n_train, cfg.seed, epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| example_loss_grad(&model, &pairs[i].0, &pairs[i].1))
                .collect::<Result<_>>()?;
            // index-ordered reduction keeps updates bit-identical at any
            // thread count
            let mut grad = vec![0.0; model.num_params()];
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            check_finite(batch_loss * scale, epoch)?;
            epoch_loss += batch_loss;
            opt.step(model.params_mut(), &grad, cfg.learning_rate);
        }
        let train_nll = check_finite(epoch_loss / n_train as f64, epoch)?;
        let val_nll = if n_val == 0 {
            f64::NAN
        } else {
            let total: f64 = (n_train..pairs.len())
                .into_par_iter()
                .map(|i| {
                    let trace = model.forward_trace(pairs[i].0.as_slice())?;
                    Ok(image_gaussian_loss(
                        trace.main(),
                        trace.log_var().expect("image head"),
                        pairs[i].1.as_slice(),
                    )
                    .0)
                })
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            total / n_val as f64
        };
        log.push(EpochLog {
            epoch,
            train_nll,
            val_nll,
            wall_ms: start.elapsed().as_millis(),
        });
    }

    let (h, w) = pairs[0].0.shape();
    let mut meta = CheckpointMeta::for_input(h, w);
    meta.epochs = cfg.epochs;
    meta.final_train_nll = log.last().map(|l| l.train_nll).unwrap_or(f64::NAN);
    Ok(TrainResult {
        checkpoint: Checkpoint::new(&model, meta),
        log,
    })
}

/// Draw the fixed per-(example, epoch) Monte Carlo inputs for downstream
/// training.
fn downstream_samples(
    upstream: &Mlp,
    input: &Image,
    cfg: &TrainConfig,
    example: usize,
    epoch: usize,
) -> Result<Vec<Image>> {
    let dist = upstream.forward_image(input)?;
    let seed = SeedSpec::new(cfg.seed, 0)
        .fork(6)
        .fork(example as u64)
        .fork(epoch as u64);
    Ok((0..cfg.mc_samples_train as u64)
        .map(|t| dist.draw(&seed, t))
        .collect())
}

enum Target {
    Value(f64),
    Class(usize),
}

fn train_downstream_impl(
    upstream_ckpt: &Checkpoint,
    inputs: &[Image],
    targets: &[Target],
    spec: &MlpSpec,
    cfg: &TrainConfig,
    label_norm: (f64, f64),
) -> Result<TrainResult> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("downstream training set"));
    }
    let upstream = upstream_ckpt.model()?;
    let (n_train, n_val) = split_train_val(inputs.len());
    let mut model = Mlp::init(spec.clone(), &SeedSpec::new(cfg.seed, 0).fork(7))?;
    let mut opt = OptState::new(cfg.optimizer, model.num_params());
    let mut log = Vec::with_capacity(cfg.epochs);

    let example_loss_grad =
        |model: &Mlp, i: usize, epoch: usize| -> Result<(f64, Vec<f64>)> {
            let samples = downstream_samples(&upstream, &inputs[i], cfg, i, epoch)?;
            match &targets[i] {
                Target::Value(y) => {
                    mc_regression_loss_and_grad(model, &samples, *y, cfg.joint_nll)
                }
                Target::Class(c) => {
                    mc_classification_loss_and_grad(model, &samples, *c, cfg.joint_nll)
                }
            }
        };

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let order = shuffled_indices(n_train, cfg.seed, epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| example_loss_grad(&model, i, epoch))
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; model.num_params()];
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            check_finite(batch_loss * scale, epoch)?;
            epoch_loss += batch_loss;
            opt.step(model.params_mut(), &grad, cfg.learning_rate);
        }
        let train_nll = check_finite(epoch_loss / n_train as f64, epoch)?;
        let val_nll = if n_val == 0 {
            f64::NAN
        } else {
            let total: f64 = (n_train..inputs.len())
                .into_par_iter()
                .map(|i| Ok(example_loss_grad(&model, i, epoch)?.0))
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            total / n_val as f64
        };
        log.push(EpochLog {
            epoch,
            train_nll,
            val_nll,
            wall_ms: start.elapsed().as_millis(),
        });
    }

    let mut meta = CheckpointMeta::for_input(
        upstream_ckpt.meta.input_height,
        upstream_ckpt.meta.input_width,
    );
    meta.label_mean = label_norm.0;
    meta.label_std = label_norm.1;
    meta.epochs = cfg.epochs;
    meta.final_train_nll = log.last().map(|l| l.train_nll).unwrap_or(f64::NAN);
    Ok(TrainResult {
        checkpoint: Checkpoint::new(&model, meta),
        log,
    })
}

/// Train a downstream regressor on (degraded input, label) pairs through
/// the frozen upstream. Labels are standardized by the training-split mean
/// and standard deviation; the factors are stored in the checkpoint and
/// undone by [`RegressionPredictor`].
pub fn train_downstream_regression(
    upstream_ckpt: &Checkpoint,
    pairs: &[(Image, f64)],
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    if pairs.is_empty() {
        return Err(Error::Empty("downstream training set"));
    }
    let (n_train, _) = split_train_val(pairs.len());
    let mean = pairs[..n_train].iter().map(|p| p.1).sum::<f64>() / n_train as f64;
    let var = pairs[..n_train]
        .iter()
        .map(|p| (p.1 - mean) * (p.1 - mean))
        .sum::<f64>()
        / n_train as f64;
    let std = var.sqrt().max(1e-9);
    let inputs: Vec<Image> = pairs.iter().map(|p| p.0.clone()).collect();
    let targets: Vec<Target> = pairs
        .iter()
        .map(|p| Target::Value((p.1 - mean) / std))
        .collect();
    train_downstream_impl(upstream_ckpt, &inputs, &targets, spec, cfg, (mean, std))
}

/// Train a downstream classifier on (degraded input, class index) pairs
/// through the frozen upstream.
pub fn train_downstream_classification(
    upstream_ckpt: &Checkpoint,
    pairs: &[(Image, usize)],
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    if let crate::models::HeadKind::Softmax { classes } = &spec.head {
        if let Some(bad) = pairs.iter().find(|p| p.1 >= *classes) {
            return Err(Error::InvalidParam {
                name: "labels",
                reason: format!("class index {} out of range for {classes} classes", bad.1),
            });
        }
    }
    let inputs: Vec<Image> = pairs.iter().map(|p| p.0.clone()).collect();
    let targets: Vec<Target> = pairs.iter().map(|p| Target::Class(p.1)).collect();
    train_downstream_impl(upstream_ckpt, &inputs, &targets, spec, cfg, (0.0, 1.0))
}

/// Inference adapter for a trained downstream regressor: undoes the label
/// standardization, returning predictions in raw label units.
pub struct RegressionPredictor {
    model: Mlp,
    label_mean: f64,
    label_std: f64,
}

impl RegressionPredictor {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(Self {
            model: ckpt.model()?,
            label_mean: ckpt.meta.label_mean,
            label_std: ckpt.meta.label_std,
        })
    }

    pub fn predict(&self, input: &Image) -> Result<ScalarGaussian> {
        let raw = self.model.forward_scalar(input)?;
        ScalarGaussian::new(
            self.label_mean + self.label_std * raw.mean,
            raw.log_var + 2.0 * self.label_std.ln(),
        )
    }
}

/// Mean per-pixel predicted standard deviation of an upstream model over a
/// set of inputs (the learned noise map).
pub fn mean_predicted_std(model: &Mlp, inputs: &[Image]) -> Result<Image> {
    if inputs.is_empty() {
        return Err(Error::Empty("inputs"));
    }
    let mut acc: Option<Image> = None;
    for input in inputs {
        let dist = model.forward_image(input)?;
        let std = dist.log_var().map(|lv| (0.5 * lv).exp());
        acc = Some(match acc {
            None => std,
            Some(a) => {
                let mut merged = a;
                for (m, s) in merged.as_mut_slice().iter_mut().zip(std.iter()) {
                    *m += s;
                }
                merged
            }
        });
    }
    let mut out = acc.expect("non-empty");
    let n = inputs.len() as f64;
    out.as_mut_slice().iter_mut().for_each(|v| *v /= n);
    Ok(out)
}
