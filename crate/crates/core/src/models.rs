//! Small trainable networks with hand-derived backprop: a shared trunk of
//! dense layers feeding either an image-Gaussian head (per-pixel mean and
//! log-variance), a scalar-Gaussian head, or a softmax head.
//!
//! Log-variance heads are clamped to [`LOG_VAR_CLAMP`] before
//! exponentiation; softmax uses max-subtraction. Forward passes are pure
//! functions of parameters and input, so concurrent inference on shared
//! frozen parameters is safe.

use serde::{Deserialize, Serialize};

use crate::distributions::{CategoricalDist, DiagGaussianImage, ScalarGaussian, LOG_VAR_CLAMP};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{SeedSpec, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Output head attached to the trunk's last hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    /// Per-pixel mean and log-variance images. With `residual_mean` the
    /// mean head is added to the network input, so an identity mapping is
    /// representable through narrow trunks.
    ImageGaussian {
        height: usize,
        width: usize,
        residual_mean: bool,
    },
    /// Scalar mean and log-variance (regression: `(y_hat, delta)`).
    ScalarGaussian,
    /// C-way class confidences.
    Softmax { classes: usize },
}

/// Architecture of one network: input size, trunk widths, activation, head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: HeadKind,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 {
            return Err(Error::InvalidParam {
                name: "input",
                reason: "input size must be positive".into(),
            });
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidParam {
                name: "hidden",
                reason: "need at least one hidden layer of positive width".into(),
            });
        }
        match &self.head {
            HeadKind::ImageGaussian {
                height,
                width,
                residual_mean,
            } => {
                if height * width == 0 {
                    return Err(Error::InvalidParam {
                        name: "head",
                        reason: "image head needs positive dimensions".into(),
                    });
                }
                if *residual_mean && height * width != self.input {
                    return Err(Error::InvalidParam {
                        name: "head",
                        reason: "residual mean head requires output shape == input shape".into(),
                    });
                }
            }
            HeadKind::ScalarGaussian => {}
            HeadKind::Softmax { classes } => {
                if *classes < 2 {
                    return Err(Error::InvalidParam {
                        name: "head",
                        reason: format!("softmax needs >= 2 classes, got {classes}"),
                    });
                }
            }
        }
        Ok(())
    }

    fn main_head_out(&self) -> usize {
        match &self.head {
            HeadKind::ImageGaussian { height, width, .. } => height * width,
            HeadKind::ScalarGaussian => 1,
            HeadKind::Softmax { classes } => *classes,
        }
    }

    fn log_var_head_out(&self) -> Option<usize> {
        match &self.head {
            HeadKind::ImageGaussian { height, width, .. } => Some(height * width),
            HeadKind::ScalarGaussian => Some(1),
            HeadKind::Softmax { .. } => None,
        }
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LinearSlot {
    w_off: usize,
    b_off: usize,
    n_in: usize,
    n_out: usize,
}

impl LinearSlot {
    fn apply(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &params[self.w_off + o * self.n_in..self.w_off + (o + 1) * self.n_in];
            let mut acc = params[self.b_off + o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
    }

    /// Accumulate parameter gradients and the input gradient.
    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        d_out: &[f64],
        grad: &mut [f64],
        d_in: &mut [f64],
    ) {
        d_in.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..self.n_out {
            let g = d_out[o];
            grad[self.b_off + o] += g;
            let w_row = &params[self.w_off + o * self.n_in..self.w_off + (o + 1) * self.n_in];
            let g_row = &mut grad[self.w_off + o * self.n_in..self.w_off + (o + 1) * self.n_in];
            for i in 0..self.n_in {
                g_row[i] += g * x[i];
                d_in[i] += w_row[i] * g;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    trunk: Vec<LinearSlot>,
    main: LinearSlot,
    log_var: Option<LinearSlot>,
    total: usize,
}

impl Layout {
    fn build(spec: &MlpSpec) -> Layout {
        let mut off = 0;
        let mut slot = |n_in: usize, n_out: usize| {
            let s = LinearSlot {
                w_off: off,
                b_off: off + n_in * n_out,
                n_in,
                n_out,
            };
            off += n_in * n_out + n_out;
            s
        };
        let mut trunk = Vec::new();
        let mut n_in = spec.input;
        for &width in &spec.hidden {
            trunk.push(slot(n_in, width));
            n_in = width;
        }
        let main = slot(n_in, spec.main_head_out());
        let log_var = spec.log_var_head_out().map(|n| slot(n_in, n));
        Layout {
            trunk,
            main,
            log_var,
            total: off,
        }
    }
}

/// A dense network with a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layout: Layout,
    params: Vec<f64>,
}

impl Mlp {
    /// Deterministic initialization: He for relu trunks, Xavier for tanh;
    /// the main head follows the trunk rule, log-variance heads start at
    /// zero (unit variance), biases at zero.
    pub fn init(spec: MlpSpec, seed: &SeedSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::build(&spec);
        let stream = Stream::new(seed);
        let mut params = vec![0.0; layout.total];
        let init_slot = |params: &mut [f64], s: &LinearSlot| {
            let std = match spec.activation {
                Activation::Relu => (2.0 / s.n_in as f64).sqrt(),
                Activation::Tanh => (2.0 / (s.n_in + s.n_out) as f64).sqrt(),
            };
            for i in 0..s.n_in * s.n_out {
                params[s.w_off + i] = std * stream.normal((s.w_off + i) as u64);
            }
        };
        for s in &layout.trunk {
            init_slot(&mut params, s);
        }
        init_slot(&mut params, &layout.main);
        // log-variance slot stays zero: training starts at unit variance
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    /// Rebuild a network from a stored parameter vector.
    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::build(&spec);
        if params.len() != layout.total {
            return Err(Error::InvalidParam {
                name: "params",
                reason: format!("expected {} parameters, got {}", layout.total, params.len()),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input {
            return Err(Error::Shape {
                expected: (1, self.spec.input),
                got: (1, input.len()),
            });
        }
        Ok(())
    }

    /// Forward pass caching everything backward needs.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut pres = Vec::with_capacity(self.layout.trunk.len());
        let mut acts = Vec::with_capacity(self.layout.trunk.len());
        let mut x = input.to_vec();
        for s in &self.layout.trunk {
            let mut pre = Vec::new();
            s.apply(&self.params, &x, &mut pre);
            let act: Vec<f64> = match self.spec.activation {
                Activation::Relu => pre.iter().map(|&z| z.max(0.0)).collect(),
                Activation::Tanh => pre.iter().map(|&z| z.tanh()).collect(),
            };
            pres.push(pre);
            x = act.clone();
            acts.push(act);
        }
        let last = acts.last().expect("trunk has at least one layer");

        let mut main_raw = Vec::new();
        self.layout.main.apply(&self.params, last, &mut main_raw);

        let (main, probs) = match &self.spec.head {
            HeadKind::ImageGaussian { residual_mean, .. } => {
                let mean = if *residual_mean {
                    main_raw.iter().zip(input).map(|(m, x)| m + x).collect()
                } else {
                    main_raw.clone()
                };
                (mean, None)
            }
            HeadKind::ScalarGaussian => (main_raw.clone(), None),
            HeadKind::Softmax { .. } => {
                let p = softmax(&main_raw);
                (p.clone(), Some(p))
            }
        };

        let log_var = self.layout.log_var.as_ref().map(|s| {
            let mut raw = Vec::new();
            s.apply(&self.params, last, &mut raw);
            let clamped = raw
                .iter()
                .map(|&v| v.clamp(LOG_VAR_CLAMP.0, LOG_VAR_CLAMP.1))
                .collect();
            LogVarTrace { raw, clamped }
        });

        Ok(Trace {
            input: input.to_vec(),
            pres,
            acts,
            main,
            probs,
            log_var,
        })
    }

    /// Upstream inference: degraded image in, per-pixel Gaussian out.
    pub fn forward_image(&self, input: &Image) -> Result<DiagGaussianImage> {
        let (height, width) = match &self.spec.head {
            HeadKind::ImageGaussian { height, width, .. } => (*height, *width),
            _ => {
                return Err(Error::InvalidParam {
                    name: "head",
                    reason: "forward_image requires an image head".into(),
                })
            }
        };
        let trace = self.forward_trace(input.as_slice())?;
        let log_var = trace.log_var.as_ref().expect("image head has log-var");
        DiagGaussianImage::new(
            Image::from_vec(height, width, trace.main.clone())?,
            Image::from_vec(height, width, log_var.clamped.clone())?,
        )
    }

    /// Downstream regression inference: `(y_hat, delta)`.
    pub fn forward_scalar(&self, input: &Image) -> Result<ScalarGaussian> {
        if !matches!(self.spec.head, HeadKind::ScalarGaussian) {
            return Err(Error::InvalidParam {
                name: "head",
                reason: "forward_scalar requires a scalar head".into(),
            });
        }
        let trace = self.forward_trace(input.as_slice())?;
        let log_var = trace.log_var.as_ref().expect("scalar head has log-var");
        ScalarGaussian::new(trace.main[0], log_var.clamped[0])
    }

    /// Downstream classification inference: class confidences.
    pub fn forward_classify(&self, input: &Image) -> Result<CategoricalDist> {
        if !matches!(self.spec.head, HeadKind::Softmax { .. }) {
            return Err(Error::InvalidParam {
                name: "head",
                reason: "forward_classify requires a softmax head".into(),
            });
        }
        let trace = self.forward_trace(input.as_slice())?;
        CategoricalDist::new(trace.main.clone())
    }

    /// Reverse pass: accumulate exact parameter gradients of a loss whose
    /// head-space gradient is `head_grad` into `grad`.
    pub fn backward(&self, trace: &Trace, head_grad: &HeadGrad, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.layout.total {
            return Err(Error::InvalidParam {
                name: "grad",
                reason: format!("expected {} entries, got {}", self.layout.total, grad.len()),
            });
        }
        let last_act = trace.acts.last().expect("trunk non-empty");
        let mut d_last = vec![0.0; last_act.len()];

        match (head_grad, &self.spec.head) {
            (HeadGrad::Gaussian { d_mean, d_log_var }, head) => {
                if matches!(head, HeadKind::Softmax { .. }) {
                    return Err(Error::InvalidParam {
                        name: "head_grad",
                        reason: "gaussian gradient on a softmax head".into(),
                    });
                }
                // the residual add is identity in the head direction
                let mut d_in = vec![0.0; last_act.len()];
                self.layout
                    .main
                    .backward(&self.params, last_act, d_mean, grad, &mut d_in);
                for (a, b) in d_last.iter_mut().zip(&d_in) {
                    *a += b;
                }
                let slot = self.layout.log_var.as_ref().expect("gaussian head");
                let lv = trace.log_var.as_ref().expect("gaussian head trace");
                // hard clamp: zero gradient outside the clamp range
                let masked: Vec<f64> = d_log_var
                    .iter()
                    .zip(&lv.raw)
                    .map(|(&g, &raw)| {
                        if (LOG_VAR_CLAMP.0..=LOG_VAR_CLAMP.1).contains(&raw) {
                            g
                        } else {
                            0.0
                        }
                    })
                    .collect();
                slot.backward(&self.params, last_act, &masked, grad, &mut d_in);
                for (a, b) in d_last.iter_mut().zip(&d_in) {
                    *a += b;
                }
            }
            (HeadGrad::Logits { d_logits }, HeadKind::Softmax { .. }) => {
                let mut d_in = vec![0.0; last_act.len()];
                self.layout
                    .main
                    .backward(&self.params, last_act, d_logits, grad, &mut d_in);
                for (a, b) in d_last.iter_mut().zip(&d_in) {
                    *a += b;
                }
            }
            (HeadGrad::Logits { .. }, _) => {
                return Err(Error::InvalidParam {
                    name: "head_grad",
                    reason: "logits gradient on a gaussian head".into(),
                });
            }
        }

        // trunk, last layer to first
        let mut d_post = d_last;
        for (l, slot) in self.layout.trunk.iter().enumerate().rev() {
            let d_pre: Vec<f64> = match self.spec.activation {
                Activation::Relu => trace.pres[l]
                    .iter()
                    .zip(&d_post)
                    .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
                    .collect(),
                Activation::Tanh => trace.acts[l]
                    .iter()
                    .zip(&d_post)
                    .map(|(&a, &g)| g * (1.0 - a * a))
                    .collect(),
            };
            let layer_in: &[f64] = if l == 0 {
                &trace.input
            } else {
                &trace.acts[l - 1]
            };
            let mut d_in = vec![0.0; layer_in.len()];
            slot.backward(&self.params, layer_in, &d_pre, grad, &mut d_in);
            d_post = d_in;
        }
        Ok(())
    }
}

/// Cached forward pass. Only [`Mlp::forward_trace`] constructs one, so a
/// backward call always has a matching forward behind it.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    pres: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    main: Vec<f64>,
    probs: Option<Vec<f64>>,
    log_var: Option<LogVarTrace>,
}

#[derive(Debug, Clone)]
struct LogVarTrace {
    raw: Vec<f64>,
    clamped: Vec<f64>,
}

impl Trace {
    /// Final mean output (post-residual) or class probabilities.
    pub fn main(&self) -> &[f64] {
        &self.main
    }

    /// Clamped log-variance output, if the head has one.
    pub fn log_var(&self) -> Option<&[f64]> {
        self.log_var.as_ref().map(|lv| lv.clamped.as_slice())
    }

    /// Softmax probabilities, if the head is softmax.
    pub fn probs(&self) -> Option<&[f64]> {
        self.probs.as_deref()
    }
}

/// Gradient of a loss with respect to head outputs.
#[derive(Debug, Clone)]
pub enum HeadGrad {
    /// With respect to the final mean and the clamped log-variance.
    Gaussian {
        d_mean: Vec<f64>,
        d_log_var: Vec<f64>,
    },
    /// With respect to pre-softmax logits.
    Logits { d_logits: Vec<f64> },
}

/// Numerically stable softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Convert a gradient w.r.t. probabilities into one w.r.t. logits:
/// `d_z[j] = p[j] * (d_p[j] - sum_c d_p[c] p[c])`.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(d_probs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(d_probs)
        .map(|(p, g)| p * (g - dot))
        .collect()
}
