//! Synthetic data: procedural ellipse phantoms with analytic labels,
//! frequency-domain simulation with additive complex Gaussian noise,
//! Cartesian column undersampling masks, and zero-filled reconstruction.
//!
//! The frequency transform is the centered 2-D DFT with unit forward
//! scaling (DC bin at `(H/2, W/2)` equals the image sum) and `1/(H*W)`
//! inverse scaling, so round trips are exact and Parseval reads
//! `energy(k) / (H*W) == energy(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ComplexImage, Image};
use crate::rng::{SeedSpec, Stream};

/// Classification label: which side of the image the dominant ellipse
/// occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn class_index(&self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// A synthetic ground-truth image with analytically known labels:
/// total ellipse area in pixels squared (regression target) and the side of
/// the dominant ellipse (classification target).
#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: Image,
    pub area: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (sin, cos) = self.angle.sin_cos();
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        (u / self.a) * (u / self.a) + (v / self.b) * (v / self.b) <= 1.0
    }

    /// Circumscribed radius; ellipses whose bounding circles are disjoint
    /// cannot overlap.
    fn radius(&self) -> f64 {
        self.a.max(self.b)
    }

    fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }
}

const SUPERSAMPLE: usize = 8;

/// Generate a phantom of `size x size` pixels: one dominant off-center
/// ellipse plus 1 to 4 smaller disjoint ellipses, anti-aliased by 8x8
/// supersampling. Deterministic per seed.
pub fn make_phantom(seed: &SeedSpec, size: usize) -> Result<Phantom> {
    let (ellipses, side) = phantom_ellipses(seed, size)?;
    let inv = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    let image = Image::from_fn(size, size, |row, col| {
        let mut acc = 0.0;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let y = row as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                let x = col as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                // ellipses are disjoint: at most one covers the sample
                for e in &ellipses {
                    if e.contains(x, y) {
                        acc += e.intensity;
                        break;
                    }
                }
            }
        }
        acc * inv
    });

    let area = ellipses.iter().map(Ellipse::area).sum();
    Ok(Phantom { image, area, side })
}

fn phantom_ellipses(seed: &SeedSpec, size: usize) -> Result<(Vec<Ellipse>, Side)> {
    if size < 16 {
        return Err(Error::InvalidParam {
            name: "size",
            reason: format!("phantom size must be >= 16, got {size}"),
        });
    }
    let s = size as f64;
    let stream = Stream::new(seed);
    let mut ctr = 0u64;
    let mut draw = |lo: f64, hi: f64| {
        let u = stream.uniform(ctr);
        ctr += 1;
        lo + (hi - lo) * u
    };

    // dominant ellipse, strictly off-center
    let side = if draw(0.0, 1.0) < 0.5 {
        Side::Left
    } else {
        Side::Right
    };
    let cx = match side {
        Side::Left => draw(0.26, 0.42),
        Side::Right => draw(0.58, 0.74),
    };
    let dominant = Ellipse {
        cx: cx * s,
        cy: draw(0.35, 0.65) * s,
        a: draw(0.14, 0.20) * s,
        b: draw(0.14, 0.20) * s,
        angle: draw(0.0, std::f64::consts::PI),
        intensity: draw(0.55, 0.80),
    };
    let mut ellipses = vec![dominant];

    // smaller satellites, disjoint by bounding circle, fully inside margins
    let extra = 1 + (draw(0.0, 1.0) * 4.0) as usize; // 1..=4
    for _ in 0..extra.min(4) {
        for _attempt in 0..60 {
            let cand = Ellipse {
                cx: draw(0.12, 0.88) * s,
                cy: draw(0.12, 0.88) * s,
                a: draw(0.05, 0.10) * s,
                b: draw(0.05, 0.10) * s,
                angle: draw(0.0, std::f64::consts::PI),
                intensity: draw(0.35, 1.0),
            };
            let inside = cand.cx - cand.radius() >= 1.0
                && cand.cy - cand.radius() >= 1.0
                && cand.cx + cand.radius() <= s - 1.0
                && cand.cy + cand.radius() <= s - 1.0;
            let disjoint = ellipses.iter().all(|e| {
                let d = ((e.cx - cand.cx).powi(2) + (e.cy - cand.cy).powi(2)).sqrt();
                d > e.radius() + cand.radius() + 0.5
            });
            if inside && disjoint {
                ellipses.push(cand);
                break;
            }
        }
    }
    if ellipses.len() < 2 {
        // guaranteed-free corner opposite the dominant side
        let cx = match side {
            Side::Left => 0.88 * s,
            Side::Right => 0.12 * s,
        };
        ellipses.push(Ellipse {
            cx,
            cy: 0.12 * s,
            a: 0.05 * s,
            b: 0.05 * s,
            angle: 0.0,
            intensity: 0.5,
        });
    }
    Ok((ellipses, side))
}

/// Cartesian undersampling parameters: keep roughly `W / R` columns, always
/// including the central `center_fraction * W` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub acceleration: f64,
    pub center_fraction: f64,
    pub width: usize,
    pub seed: SeedSpec,
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        let w = self.width as f64;
        if !(self.acceleration.is_finite() && self.acceleration > 0.0) {
            return Err(Error::Mask(format!(
                "acceleration must be positive, got {}",
                self.acceleration
            )));
        }
        if !(self.center_fraction > 0.0 && self.center_fraction < 1.0) {
            return Err(Error::Mask(format!(
                "center fraction must lie in (0, 1), got {}",
                self.center_fraction
            )));
        }
        if self.center_fraction * w < 1.0 {
            return Err(Error::Mask(format!(
                "center fraction {} keeps no full column at width {}",
                self.center_fraction, self.width
            )));
        }
        if self.center_fraction * w > w / self.acceleration {
            return Err(Error::Mask(format!(
                "center block alone ({} columns) exceeds the budget of {:.2} columns at R = {}",
                self.center_fraction * w,
                w / self.acceleration,
                self.acceleration
            )));
        }
        Ok(())
    }

    fn num_center(&self) -> usize {
        (self.center_fraction * self.width as f64).round() as usize
    }
}

/// Column keep mask: the centered block of `round(c * W)` columns is always
/// kept; every other column is kept i.i.d. with
/// `p = (W/R - c*W) / (W - c*W)`, clamped to `[0, 1]`. Deterministic per
/// seed.
pub fn make_mask(spec: &MaskSpec) -> Result<Vec<bool>> {
    spec.validate()?;
    let w = spec.width;
    let num_center = spec.num_center();
    let start = (w - num_center) / 2;
    let wf = w as f64;
    let cw = spec.center_fraction * wf;
    let p = ((wf / spec.acceleration - cw) / (wf - cw)).clamp(0.0, 1.0);
    let stream = Stream::new(&spec.seed);
    let mask = (0..w)
        .map(|col| {
            if col >= start && col < start + num_center {
                true
            } else {
                stream.uniform(col as u64) < p
            }
        })
        .collect();
    Ok(mask)
}

/// Frequency-domain data for one example: masked k-space plus the mask and
/// its parameters. Masked-out columns are exactly zero.
#[derive(Debug, Clone)]
pub struct KSpaceSample {
    pub kspace: ComplexImage,
    pub mask: Vec<bool>,
    pub noise_std: f64,
    pub mask_spec: MaskSpec,
}

impl KSpaceSample {
    /// Apply a fresh mask from `mask_spec` to fully sampled k-space.
    pub fn undersample(
        full: &ComplexImage,
        mask_spec: MaskSpec,
        noise_std: f64,
    ) -> Result<Self> {
        if mask_spec.width != full.width() {
            return Err(Error::Mask(format!(
                "mask width {} does not match k-space width {}",
                mask_spec.width,
                full.width()
            )));
        }
        let mask = make_mask(&mask_spec)?;
        let mut kspace = full.clone();
        for row in 0..kspace.height() {
            for (col, &keep) in mask.iter().enumerate() {
                if !keep {
                    kspace.set(row, col, 0.0, 0.0);
                }
            }
        }
        Ok(Self {
            kspace,
            mask,
            noise_std,
            mask_spec,
        })
    }

    pub fn kept_columns(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Centered 2-D DFT of a real image plus i.i.d. complex Gaussian noise.
///
/// `noise_std` is quoted at image scale: the k-space draw uses
/// `noise_std * sqrt(H*W)` per real/imaginary component, which corresponds
/// to white image-domain noise with the stated standard deviation under the
/// `1/(H*W)` inverse.
pub fn to_kspace(image: &Image, noise_std: f64, seed: &SeedSpec) -> Result<ComplexImage> {
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::InvalidParam {
            name: "noise_std",
            reason: format!("must be non-negative, got {noise_std}"),
        });
    }
    if !image.all_finite() {
        return Err(Error::NonFinite("to_kspace input"));
    }
    let mut k = dft_2d(&ComplexImage::from_real(image), false);
    if noise_std > 0.0 {
        let scale = noise_std * (image.len() as f64).sqrt();
        let stream = Stream::new(seed);
        for i in 0..k.re.len() {
            k.re[i] += scale * stream.normal(2 * i as u64);
            k.im[i] += scale * stream.normal(2 * i as u64 + 1);
        }
    }
    Ok(k)
}

/// Magnitude of the inverse centered DFT of the masked k-space.
pub fn zero_filled_recon(sample: &KSpaceSample) -> Image {
    dft_2d(&sample.kspace, true).magnitude()
}

/// Centered discrete Fourier transform. Forward uses unit scaling; the
/// inverse applies `1/(H*W)`. The zero-frequency bin sits at
/// `(H/2, W/2)`.
pub fn dft_2d(input: &ComplexImage, inverse: bool) -> ComplexImage {
    let (h, w) = input.shape();
    let rows = dft_axis(input, w, true, inverse);
    let mut out = dft_axis(&rows, h, false, inverse);
    if inverse {
        let norm = 1.0 / (h * w) as f64;
        for v in out.re.iter_mut().chain(out.im.iter_mut()) {
            *v *= norm;
        }
    }
    out
}

/// 1-D centered DFT along one axis of every row/column.
///
/// The `n/2` shift always applies to the frequency index: the transform's
/// output going forward, its input coming back.
fn dft_axis(input: &ComplexImage, n: usize, along_rows: bool, inverse: bool) -> ComplexImage {
    let (h, w) = input.shape();
    let sign = if inverse { 1.0 } else { -1.0 };
    let half = (n / 2) as i64;
    // twiddle[f][s] = exp(sign * 2*pi*i * (f - n/2) * s / n)
    let mut tw_re = vec![0.0; n * n];
    let mut tw_im = vec![0.0; n * n];
    for f in 0..n {
        let freq = f as i64 - half;
        for s in 0..n {
            let ang = sign * std::f64::consts::TAU * freq as f64 * s as f64 / n as f64;
            tw_re[f * n + s] = ang.cos();
            tw_im[f * n + s] = ang.sin();
        }
    }
    let mut out = ComplexImage::zeros(h, w);
    let (outer, inner) = if along_rows { (h, w) } else { (w, h) };
    debug_assert_eq!(inner, n);
    for o in 0..outer {
        for k in 0..n {
            let (mut acc_re, mut acc_im) = (0.0, 0.0);
            for t in 0..n {
                let (re, im) = if along_rows {
                    input.at(o, t)
                } else {
                    input.at(t, o)
                };
                let idx = if inverse { t * n + k } else { k * n + t };
                let (tr, ti) = (tw_re[idx], tw_im[idx]);
                acc_re += re * tr - im * ti;
                acc_im += re * ti + im * tr;
            }
            if along_rows {
                out.set(o, k, acc_re, acc_im);
            } else {
                out.set(k, o, acc_re, acc_im);
            }
        }
    }
    out
}
