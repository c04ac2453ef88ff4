//! Image-quality and task metrics: SSIM against the fully sampled ground
//! truth, L1/L2 regression errors, classification accuracy, and the
//! dataset-level aggregation rules for uncertainty columns (square root of
//! the mean for variances, plain mean for entropies).

use crate::distributions::CategoricalDist;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::propagation::{ClassificationJoint, RegressionJoint};

/// SSIM parameters. Defaults: 7-pixel Gaussian window, k1 = 0.01,
/// k2 = 0.03; the dynamic range is taken from the ground-truth image.
#[derive(Debug, Clone, Copy)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl SsimParams {
    pub fn new(window: usize, k1: f64, k2: f64, dynamic_range: f64) -> Result<Self> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(Error::InvalidParam {
                name: "window",
                reason: format!("window must be odd and >= 3, got {window}"),
            });
        }
        for (name, k) in [("k1", k1), ("k2", k2)] {
            if !(k > 0.0 && k < 0.2) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must lie in (0, 0.2), got {k}"),
                });
            }
        }
        if dynamic_range.is_nan() || dynamic_range <= 0.0 {
            return Err(Error::InvalidParam {
                name: "dynamic_range",
                reason: format!("must be positive, got {dynamic_range}"),
            });
        }
        Ok(Self {
            window,
            k1,
            k2,
            dynamic_range,
        })
    }

    /// Literature defaults with the dynamic range of `reference`
    /// (`max - min`, floored at 1e-12 for constant images).
    pub fn default_for(reference: &Image) -> Self {
        let range = (reference.max() - reference.min()).max(1e-12);
        Self {
            window: 7,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: range,
        }
    }
}

/// Mean local SSIM over all window positions fully inside the image,
/// with Gaussian weights (`sigma = window / 6`) and stabilizers
/// `C1 = (k1 L)^2`, `C2 = (k2 L)^2`.
pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    a.same_shape(b)?;
    if !a.all_finite() || !b.all_finite() {
        return Err(Error::NonFinite("ssim input"));
    }
    let (h, w) = a.shape();
    if p.window > h || p.window > w {
        return Err(Error::InvalidParam {
            name: "window",
            reason: format!("window {} exceeds image {}x{}", p.window, h, w),
        });
    }
    let kernel = gaussian_kernel(p.window);
    let mu_a = separable_filter(a, &kernel);
    let mu_b = separable_filter(b, &kernel);
    let e_aa = separable_filter(&a.map(|x| x * x), &kernel);
    let e_bb = separable_filter(&b.map(|x| x * x), &kernel);
    let ab = Image::from_fn(h, w, |r, c| a.get(r, c) * b.get(r, c));
    let e_ab = separable_filter(&ab, &kernel);

    let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    let c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..mu_a.height() {
        for c in 0..mu_a.width() {
            let (ma, mb) = (mu_a.get(r, c), mu_b.get(r, c));
            let va = e_aa.get(r, c) - ma * ma;
            let vb = e_bb.get(r, c) - mb * mb;
            let cov = e_ab.get(r, c) - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Normalized 1-D Gaussian window, `sigma = len / 6`.
fn gaussian_kernel(len: usize) -> Vec<f64> {
    let sigma = len as f64 / 6.0;
    let half = (len / 2) as f64;
    let mut k: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - half) * (i as f64 - half)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-mode separable convolution: rows then columns. Output shape is
/// `(h - len + 1, w - len + 1)`.
fn separable_filter(img: &Image, kernel: &[f64]) -> Image {
    let (h, w) = img.shape();
    let len = kernel.len();
    let mut rows = Image::zeros(h, w - len + 1);
    for r in 0..h {
        for c in 0..w - len + 1 {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * img.get(r, c + i);
            }
            rows.set(r, c, acc);
        }
    }
    let mut out = Image::zeros(h - len + 1, w - len + 1);
    for r in 0..h - len + 1 {
        for c in 0..rows.width() {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * rows.get(r + i, c);
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Absolute and squared error of one prediction.
pub fn l1_l2(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d.abs(), d * d)
}

/// Mean absolute error and root-mean-square error over a dataset.
pub fn l1_l2_dataset(preds: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Empty("l1_l2_dataset inputs"));
    }
    let n = preds.len() as f64;
    let (l1_sum, l2_sum) = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| l1_l2(p, t))
        .fold((0.0, 0.0), |(a, b), (l1, l2)| (a + l1, b + l2));
    Ok((l1_sum / n, (l2_sum / n).sqrt()))
}

/// Fraction of predictions whose most probable class equals the label.
/// Argmax ties break toward the lowest class index.
pub fn accuracy(preds: &[CategoricalDist], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Empty("accuracy inputs"));
    }
    let correct = preds
        .iter()
        .zip(labels)
        .filter(|(p, &l)| p.argmax() == l)
        .count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Square root of the mean: the aggregation rule for every variance column
/// (mean first, square root after).
pub fn sqrt_of_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("sqrt_of_mean"));
    }
    Ok((values.iter().sum::<f64>() / values.len() as f64).sqrt())
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Dataset-level uncertainty columns for regression sweeps: square roots of
/// the mean variance components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionUncertaintyColumns {
    pub sqrt_mean_var_prop: f64,
    pub sqrt_mean_mu_delta: f64,
    pub sqrt_mean_var_joint: f64,
}

pub fn aggregate_regression_uncertainty(
    rows: &[RegressionJoint],
) -> Result<RegressionUncertaintyColumns> {
    if rows.is_empty() {
        return Err(Error::Empty("regression rows"));
    }
    let var_prop: Vec<f64> = rows.iter().map(|r| r.var_prop).collect();
    let mu_delta: Vec<f64> = rows.iter().map(|r| r.mu_delta).collect();
    let var_joint: Vec<f64> = rows.iter().map(|r| r.var_joint).collect();
    Ok(RegressionUncertaintyColumns {
        sqrt_mean_var_prop: sqrt_of_mean(&var_prop)?,
        sqrt_mean_mu_delta: sqrt_of_mean(&mu_delta)?,
        sqrt_mean_var_joint: sqrt_of_mean(&var_joint)?,
    })
}

/// Dataset-level uncertainty columns for classification sweeps: plain means
/// of the entropy components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationUncertaintyColumns {
    pub mean_mutual_info: f64,
    pub mean_cond_entropy: f64,
    pub mean_entropy: f64,
}

pub fn aggregate_classification_uncertainty(
    rows: &[ClassificationJoint],
) -> Result<ClassificationUncertaintyColumns> {
    if rows.is_empty() {
        return Err(Error::Empty("classification rows"));
    }
    let mi: Vec<f64> = rows.iter().map(|r| r.mutual_info).collect();
    let ce: Vec<f64> = rows.iter().map(|r| r.cond_entropy).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.entropy).collect();
    Ok(ClassificationUncertaintyColumns {
        mean_mutual_info: mean(&mi)?,
        mean_cond_entropy: mean(&ce)?,
        mean_entropy: mean(&h)?,
    })
}
