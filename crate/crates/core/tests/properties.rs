//! Property tests for the distribution and propagation invariants.

use proptest::prelude::*;

use uncprop_core::distributions::{CategoricalDist, DiagGaussianImage, ScalarGaussian};
use uncprop_core::image::Image;
use uncprop_core::metrics::{ssim, SsimParams};
use uncprop_core::models::{Activation, HeadKind, Mlp, MlpSpec};
use uncprop_core::propagation::{
    aggregate_classification_samples, aggregate_regression_samples,
};
use uncprop_core::rng::SeedSpec;

fn categorical(classes: usize) -> impl Strategy<Value = CategoricalDist> {
    prop::collection::vec(1e-6..1.0f64, classes).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        CategoricalDist::new(raw.iter().map(|v| v / sum).collect()).unwrap()
    })
}

fn scalar_heads(len: usize) -> impl Strategy<Value = Vec<ScalarGaussian>> {
    prop::collection::vec((-50.0..50.0f64, -8.0..4.0f64), len)
        .prop_map(|v| {
            v.into_iter()
                .map(|(m, lv)| ScalarGaussian::new(m, lv).unwrap())
                .collect()
        })
}

proptest! {
    #[test]
    fn regression_decomposition_is_exact(heads in scalar_heads(16)) {
        let joint = aggregate_regression_samples(&heads).unwrap();
        // var_joint is the sum by construction
        prop_assert_eq!(joint.var_joint, joint.var_prop + joint.mu_delta);
        prop_assert!(joint.var_prop >= 0.0);
        prop_assert!(joint.mu_delta >= 0.0);
    }

    #[test]
    fn classification_decomposition_and_bounds(samples in prop::collection::vec(categorical(4), 2..24)) {
        let joint = aggregate_classification_samples(&samples).unwrap();
        prop_assert!((joint.entropy - joint.cond_entropy - joint.mutual_info).abs() <= 1e-12);
        prop_assert!(joint.mutual_info >= -1e-12);
        prop_assert!(joint.cond_entropy >= 0.0);
        // Jensen: entropy of the mean >= mean entropy
        prop_assert!(joint.cond_entropy <= joint.entropy + 1e-12);
        prop_assert!(joint.entropy <= (4.0f64).ln() + 1e-12);
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        heads in scalar_heads(12),
        rotation in 0usize..12,
    ) {
        let base = aggregate_regression_samples(&heads).unwrap();
        let mut rotated = heads.clone();
        rotated.rotate_left(rotation);
        let again = aggregate_regression_samples(&rotated).unwrap();
        prop_assert_eq!(base.mu_hat.to_bits(), again.mu_hat.to_bits());
        prop_assert_eq!(base.var_prop.to_bits(), again.var_prop.to_bits());
        prop_assert_eq!(base.mu_delta.to_bits(), again.mu_delta.to_bits());
    }

    #[test]
    fn sampling_is_seed_deterministic(master in any::<u64>(), stream in any::<u64>()) {
        let dist = DiagGaussianImage::new(
            Image::splat(3, 3, 0.5),
            Image::splat(3, 3, -1.0),
        ).unwrap();
        let seed = SeedSpec::new(master, stream);
        prop_assert_eq!(dist.sample(&seed), dist.sample(&seed));
    }

    #[test]
    fn ssim_symmetric_and_bounded(
        phase_a in 0.0..std::f64::consts::TAU,
        phase_b in 0.0..std::f64::consts::TAU,
    ) {
        let a = Image::from_fn(9, 9, |r, c| 0.5 + 0.3 * ((r as f64 * 0.8 + c as f64 + phase_a).sin()));
        let b = Image::from_fn(9, 9, |r, c| 0.5 + 0.3 * ((r as f64 + c as f64 * 1.2 + phase_b).sin()));
        let p = SsimParams::new(7, 0.01, 0.03, 1.0).unwrap();
        let fwd = ssim(&a, &b, &p).unwrap();
        let bwd = ssim(&b, &a, &p).unwrap();
        prop_assert!((fwd - bwd).abs() <= 1e-12);
        prop_assert!(fwd <= 1.0 + 1e-12);
    }

    #[test]
    fn forward_variance_respects_clamp(seed in any::<u64>(), scale in 0.1..200.0f64) {
        let spec = MlpSpec {
            input: 4,
            hidden: vec![6],
            activation: Activation::Relu,
            head: HeadKind::ScalarGaussian,
        };
        let mut net = Mlp::init(spec, &SeedSpec::new(seed, 0)).unwrap();
        for p in net.params_mut() {
            *p *= scale;
        }
        let input = Image::from_vec(1, 4, vec![scale, -scale, 0.5, 2.0]).unwrap();
        let out = net.forward_scalar(&input).unwrap();
        prop_assert!(out.variance() >= (-15.0f64).exp());
        prop_assert!(out.variance() <= (15.0f64).exp());
    }

    #[test]
    fn argmax_invariant_under_power_rescale(dist in categorical(5)) {
        // strictly monotone transform of the probabilities preserves argmax
        let powered: Vec<f64> = dist.probs().iter().map(|p| p.powf(1.7)).collect();
        let sum: f64 = powered.iter().sum();
        let rescaled = CategoricalDist::new(powered.iter().map(|p| p / sum).collect()).unwrap();
        prop_assert_eq!(dist.argmax(), rescaled.argmax());
    }
}
