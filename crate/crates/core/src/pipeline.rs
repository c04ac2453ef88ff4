//! End-to-end orchestration: load checkpoints, run upstream inference,
//! propagate through the downstream model, score every example, and
//! aggregate per-acceleration sweep rows.
//!
//! All aggregates come from full-precision accumulators; rounding to four
//! significant digits happens only when the CSVs are serialized. Example
//! records are keyed by `(mask, example)` and Monte Carlo streams by
//! `(master_seed, example_id, R)`, so sweeps reproduce byte-identical
//! output at any thread count or evaluation order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::{mc_seed, Dataset, LoadedExample, MaskPair, Split};
use crate::distributions::DiagGaussianImage;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{
    accuracy, aggregate_classification_uncertainty, aggregate_regression_uncertainty,
    l1_l2_dataset, mean, sqrt_of_mean, ssim, SsimParams,
};
use crate::models::{HeadKind, Mlp};
use crate::propagation::{
    propagate_classification, propagate_regression, ClassificationJoint, McConfig,
    RegressionJoint,
};
use crate::synth::zero_filled_recon;
use crate::training::RegressionPredictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Regression => write!(f, "regression"),
            Task::Classification => write!(f, "classification"),
        }
    }
}

/// Per-example result of one pipeline pass.
#[derive(Debug, Clone)]
pub struct ExampleRecord {
    pub example_id: usize,
    pub acceleration: f64,
    pub center_fraction: f64,
    /// SSIM of the upstream mean image against the ground truth.
    pub ssim: f64,
    /// Mean over pixels of the upstream per-pixel variance.
    pub mean_var_x: f64,
    pub outcome: ExampleOutcome,
}

#[derive(Debug, Clone)]
pub enum ExampleOutcome {
    Regression {
        joint: RegressionJoint,
        label: f64,
    },
    Classification {
        joint: ClassificationJoint,
        label: usize,
        predicted: usize,
    },
}

/// One aggregate row of the sweep report.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub acceleration: f64,
    pub center_fraction: f64,
    pub ssim_mean: f64,
    pub sqrt_mean_var_x: f64,
    pub task_cols: TaskColumns,
    /// Decomposition identity recomputed from raw per-example sums;
    /// `|residual|` stays below 1e-9 by construction.
    pub identity_residual: f64,
}

#[derive(Debug, Clone)]
pub enum TaskColumns {
    Regression {
        l1: f64,
        l2: f64,
        sqrt_var_prop: f64,
        sqrt_mu_delta: f64,
        sqrt_var_joint: f64,
    },
    Classification {
        accuracy: f64,
        mean_mutual_info: f64,
        mean_cond_entropy: f64,
        mean_entropy: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub task: Task,
    pub rows: Vec<SweepRow>,
    pub records: Vec<ExampleRecord>,
}

/// Run manifest emitted next to the CSVs: configuration, seeds, and
/// artifact checksums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: Task,
    pub mc_samples: usize,
    pub master_seed: u64,
    pub dataset_checksum: u64,
    pub upstream_checksum: u64,
    pub downstream_checksum: u64,
    pub masks: Vec<MaskPair>,
    pub report_rows: usize,
    pub scatter_rows: usize,
    pub config: serde_json::Value,
}

enum Downstream {
    Regression(RegressionPredictor),
    Classification(Mlp),
}

/// A loaded two-stage pipeline ready to evaluate examples.
pub struct Pipeline {
    upstream: Mlp,
    downstream: Downstream,
    task: Task,
    mc_samples: usize,
    master_seed: u64,
    zero_variance_override: bool,
}

impl Pipeline {
    /// Instantiate from checkpoints, validating shape compatibility. The
    /// downstream head decides the task.
    pub fn new(
        upstream: &Checkpoint,
        downstream: &Checkpoint,
        mc_samples: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let upstream_model = upstream.model()?;
        let (out_h, out_w) = match upstream_model.spec().head {
            HeadKind::ImageGaussian { height, width, .. } => (height, width),
            _ => {
                return Err(Error::Checkpoint(
                    "upstream checkpoint must carry an image head".into(),
                ))
            }
        };
        let task = match downstream.spec.head {
            HeadKind::ScalarGaussian => Task::Regression,
            HeadKind::Softmax { .. } => Task::Classification,
            HeadKind::ImageGaussian { .. } => {
                return Err(Error::Checkpoint(
                    "downstream checkpoint cannot carry an image head".into(),
                ))
            }
        };
        if downstream.spec.input != out_h * out_w {
            return Err(Error::Shape {
                expected: (1, out_h * out_w),
                got: (1, downstream.spec.input),
            });
        }
        let downstream = match task {
            Task::Regression => {
                Downstream::Regression(RegressionPredictor::from_checkpoint(downstream)?)
            }
            Task::Classification => Downstream::Classification(downstream.model()?),
        };
        if mc_samples < 2 {
            return Err(Error::Config(format!(
                "mc_samples must be >= 2, got {mc_samples}"
            )));
        }
        Ok(Self {
            upstream: upstream_model,
            downstream,
            task,
            mc_samples,
            master_seed,
            zero_variance_override: false,
        })
    }

    /// Replace the upstream variance with a near-zero floor; the collapse
    /// diagnostic for propagated uncertainty.
    pub fn with_zero_variance_override(mut self, on: bool) -> Self {
        self.zero_variance_override = on;
        self
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Evaluate one example under mask pair `mask_index`.
    pub fn run_example(
        &self,
        example: &LoadedExample,
        mask_index: usize,
    ) -> Result<ExampleRecord> {
        let sample = example.undersampled(mask_index)?;
        let recon = zero_filled_recon(&sample);
        if recon.shape() != example.image.shape() {
            return Err(Error::Shape {
                expected: example.image.shape(),
                got: recon.shape(),
            });
        }
        let mut dist = self.upstream.forward_image(&recon)?;
        if self.zero_variance_override {
            let (h, w) = dist.shape();
            dist = DiagGaussianImage::new(dist.mean().clone(), Image::splat(h, w, -50.0))?;
        }
        let ssim_val = ssim(
            dist.mean(),
            &example.image,
            &SsimParams::default_for(&example.image),
        )?;
        let mean_var_x = dist.mean_variance();
        let accel = sample.mask_spec.acceleration;
        let cfg = McConfig::new(
            self.mc_samples,
            mc_seed(self.master_seed, example.id, accel),
        );
        let outcome = match &self.downstream {
            Downstream::Regression(predictor) => ExampleOutcome::Regression {
                joint: propagate_regression(&dist, |x: &Image| predictor.predict(x), &cfg)?,
                label: example.area,
            },
            Downstream::Classification(model) => {
                let joint =
                    propagate_classification(&dist, |x: &Image| model.forward_classify(x), &cfg)?;
                let predicted = joint.mean_probs.argmax();
                ExampleOutcome::Classification {
                    joint,
                    label: example.side.class_index(),
                    predicted,
                }
            }
        };
        Ok(ExampleRecord {
            example_id: example.id,
            acceleration: accel,
            center_fraction: sample.mask_spec.center_fraction,
            ssim: ssim_val,
            mean_var_x,
            outcome,
        })
    }

    /// Evaluate the dataset's eval split under every configured mask pair
    /// and aggregate one report row per pair.
    pub fn run_sweep(&self, dataset: &Dataset) -> Result<SweepReport> {
        let eval: Vec<&LoadedExample> = dataset.split(Split::Eval);
        if eval.is_empty() {
            return Err(Error::Empty("evaluation split"));
        }
        let mut rows = Vec::with_capacity(dataset.manifest.masks.len());
        let mut records = Vec::with_capacity(eval.len() * dataset.manifest.masks.len());
        for (mask_index, pair) in dataset.manifest.masks.iter().enumerate() {
            let mask_records: Vec<ExampleRecord> = eval
                .par_iter()
                .map(|example| self.run_example(example, mask_index))
                .collect::<Result<_>>()?;
            rows.push(aggregate_row(pair, &mask_records, self.task)?);
            records.extend(mask_records);
        }
        Ok(SweepReport {
            task: self.task,
            rows,
            records,
        })
    }
}

fn aggregate_row(pair: &MaskPair, records: &[ExampleRecord], task: Task) -> Result<SweepRow> {
    let ssims: Vec<f64> = records.iter().map(|r| r.ssim).collect();
    let var_x: Vec<f64> = records.iter().map(|r| r.mean_var_x).collect();
    let (task_cols, identity_residual) = match task {
        Task::Regression => {
            let joints: Vec<RegressionJoint> = records
                .iter()
                .map(|r| match &r.outcome {
                    ExampleOutcome::Regression { joint, .. } => *joint,
                    _ => unreachable!("task-consistent records"),
                })
                .collect();
            let preds: Vec<f64> = joints.iter().map(|j| j.mu_hat).collect();
            let labels: Vec<f64> = records
                .iter()
                .map(|r| match &r.outcome {
                    ExampleOutcome::Regression { label, .. } => *label,
                    _ => unreachable!(),
                })
                .collect();
            let (l1, l2) = l1_l2_dataset(&preds, &labels)?;
            let cols = aggregate_regression_uncertainty(&joints)?;
            // raw-sum audit of the decomposition identity
            let sum_prop: f64 = joints.iter().map(|j| j.var_prop).sum();
            let sum_delta: f64 = joints.iter().map(|j| j.mu_delta).sum();
            let sum_joint: f64 = joints.iter().map(|j| j.var_joint).sum();
            let residual = (sum_joint - sum_prop - sum_delta) / joints.len() as f64;
            (
                TaskColumns::Regression {
                    l1,
                    l2,
                    sqrt_var_prop: cols.sqrt_mean_var_prop,
                    sqrt_mu_delta: cols.sqrt_mean_mu_delta,
                    sqrt_var_joint: cols.sqrt_mean_var_joint,
                },
                residual,
            )
        }
        Task::Classification => {
            let joints: Vec<ClassificationJoint> = records
                .iter()
                .map(|r| match &r.outcome {
                    ExampleOutcome::Classification { joint, .. } => joint.clone(),
                    _ => unreachable!("task-consistent records"),
                })
                .collect();
            let preds: Vec<_> = joints.iter().map(|j| j.mean_probs.clone()).collect();
            let labels: Vec<usize> = records
                .iter()
                .map(|r| match &r.outcome {
                    ExampleOutcome::Classification { label, .. } => *label,
                    _ => unreachable!(),
                })
                .collect();
            let acc = accuracy(&preds, &labels)?;
            let cols = aggregate_classification_uncertainty(&joints)?;
            let sum_h: f64 = joints.iter().map(|j| j.entropy).sum();
            let sum_ce: f64 = joints.iter().map(|j| j.cond_entropy).sum();
            let sum_mi: f64 = joints.iter().map(|j| j.mutual_info).sum();
            let residual = (sum_h - sum_ce - sum_mi) / joints.len() as f64;
            (
                TaskColumns::Classification {
                    accuracy: acc,
                    mean_mutual_info: cols.mean_mutual_info,
                    mean_cond_entropy: cols.mean_cond_entropy,
                    mean_entropy: cols.mean_entropy,
                },
                residual,
            )
        }
    };
    Ok(SweepRow {
        acceleration: pair.acceleration,
        center_fraction: pair.center_fraction,
        ssim_mean: mean(&ssims)?,
        sqrt_mean_var_x: sqrt_of_mean(&var_x)?,
        task_cols,
        identity_residual,
    })
}

/// Format with 4 significant digits; the only place values are rounded.
pub fn fmt_sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (3 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Serialize the per-acceleration report. Columns mirror the regression /
/// classification table layouts.
pub fn sweep_report_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    match report.task {
        Task::Regression => {
            out.push_str(
                "acceleration,center_fraction,ssim,sqrt_var_x,l1,l2,sqrt_var_prop,sqrt_mu_delta,sqrt_var_joint\n",
            );
            for row in &report.rows {
                if let TaskColumns::Regression {
                    l1,
                    l2,
                    sqrt_var_prop,
                    sqrt_mu_delta,
                    sqrt_var_joint,
                } = &row.task_cols
                {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        fmt_sig4(row.acceleration),
                        fmt_sig4(row.center_fraction),
                        fmt_sig4(row.ssim_mean),
                        fmt_sig4(row.sqrt_mean_var_x),
                        fmt_sig4(*l1),
                        fmt_sig4(*l2),
                        fmt_sig4(*sqrt_var_prop),
                        fmt_sig4(*sqrt_mu_delta),
                        fmt_sig4(*sqrt_var_joint),
                    ));
                }
            }
        }
        Task::Classification => {
            out.push_str(
                "acceleration,center_fraction,ssim,sqrt_var_x,accuracy,mutual_info,cond_entropy,entropy\n",
            );
            for row in &report.rows {
                if let TaskColumns::Classification {
                    accuracy,
                    mean_mutual_info,
                    mean_cond_entropy,
                    mean_entropy,
                } = &row.task_cols
                {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        fmt_sig4(row.acceleration),
                        fmt_sig4(row.center_fraction),
                        fmt_sig4(row.ssim_mean),
                        fmt_sig4(row.sqrt_mean_var_x),
                        fmt_sig4(*accuracy),
                        fmt_sig4(*mean_mutual_info),
                        fmt_sig4(*mean_cond_entropy),
                        fmt_sig4(*mean_entropy),
                    ));
                }
            }
        }
    }
    out
}

/// Serialize per-example scatter records (one row per example per mask).
pub fn scatter_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    match report.task {
        Task::Regression => {
            out.push_str(
                "acceleration,center_fraction,example_id,ssim,mean_var_x,var_prop,mu_delta,var_joint,prediction,label\n",
            );
            for r in &report.records {
                if let ExampleOutcome::Regression { joint, label } = &r.outcome {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        fmt_sig4(r.acceleration),
                        fmt_sig4(r.center_fraction),
                        r.example_id,
                        fmt_sig4(r.ssim),
                        fmt_sig4(r.mean_var_x),
                        fmt_sig4(joint.var_prop),
                        fmt_sig4(joint.mu_delta),
                        fmt_sig4(joint.var_joint),
                        fmt_sig4(joint.mu_hat),
                        fmt_sig4(*label),
                    ));
                }
            }
        }
        Task::Classification => {
            out.push_str(
                "acceleration,center_fraction,example_id,ssim,mean_var_x,mutual_info,cond_entropy,entropy,predicted,label\n",
            );
            for r in &report.records {
                if let ExampleOutcome::Classification {
                    joint,
                    label,
                    predicted,
                } = &r.outcome
                {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        fmt_sig4(r.acceleration),
                        fmt_sig4(r.center_fraction),
                        r.example_id,
                        fmt_sig4(r.ssim),
                        fmt_sig4(r.mean_var_x),
                        fmt_sig4(joint.mutual_info),
                        fmt_sig4(joint.cond_entropy),
                        fmt_sig4(joint.entropy),
                        predicted,
                        label,
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::CheckpointMeta;
    use crate::dataset::{generate, load, DatasetSpec};
    use crate::models::{Activation, MlpSpec};
    use crate::rng::SeedSpec;
    use crate::training::{
        train_downstream_classification, train_upstream, TrainConfig,
    };
    use std::path::PathBuf;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir =
            std::env::temp_dir().join(format!("uncprop_pipeline_{tag}_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn tiny_setup(tag: &str) -> (PathBuf, Checkpoint, Checkpoint) {
        let dir = tmpdir(tag);
        let spec = DatasetSpec {
            size: 16,
            eval_count: 6,
            train_count: 12,
            noise_std: 0.02,
            seed: 11,
            masks: vec![
                MaskPair {
                    acceleration: 2.0,
                    center_fraction: 0.16,
                },
                MaskPair {
                    acceleration: 4.0,
                    center_fraction: 0.08,
                },
            ],
        };
        generate(&dir, &spec).unwrap();
        let ds = load(&dir).unwrap();

        let up_pairs: Vec<(Image, Image)> = ds
            .split(Split::TrainUpstream)
            .iter()
            .flat_map(|e| {
                (0..ds.manifest.masks.len()).map(|m| {
                    let recon = zero_filled_recon(&e.undersampled(m).unwrap());
                    (recon, e.image.clone())
                })
            })
            .collect();
        let up_spec = MlpSpec {
            input: 256,
            hidden: vec![12],
            activation: Activation::Relu,
            head: HeadKind::ImageGaussian {
                height: 16,
                width: 16,
                residual_mean: true,
            },
        };
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let upstream = train_upstream(&up_pairs, &up_spec, &cfg).unwrap().checkpoint;

        let down_pairs: Vec<(Image, usize)> = ds
            .split(Split::TrainDownstream)
            .iter()
            .flat_map(|e| {
                (0..ds.manifest.masks.len()).map(|m| {
                    let recon = zero_filled_recon(&e.undersampled(m).unwrap());
                    (recon, e.side.class_index())
                })
            })
            .collect();
        let down_spec = MlpSpec {
            input: 256,
            hidden: vec![8],
            activation: Activation::Relu,
            head: HeadKind::Softmax { classes: 2 },
        };
        let downstream = train_downstream_classification(&upstream, &down_pairs, &down_spec, &cfg)
            .unwrap()
            .checkpoint;
        (dir, upstream, downstream)
    }

    #[test]
    fn sweep_shape_and_identities() {
        let (dir, upstream, downstream) = tiny_setup("sweep");
        let ds = load(&dir).unwrap();
        let pipeline = Pipeline::new(&upstream, &downstream, 16, 77).unwrap();
        assert_eq!(pipeline.task(), Task::Classification);
        let report = pipeline.run_sweep(&ds).unwrap();
        // scatter rows = eval size x mask count
        assert_eq!(report.records.len(), 6 * 2);
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.identity_residual.abs() < 1e-9);
        }
        // single-example record agrees with the sweep's first record
        let eval = ds.split(Split::Eval);
        let single = pipeline.run_example(eval[0], 0).unwrap();
        let from_sweep = &report.records[0];
        assert_eq!(single.example_id, from_sweep.example_id);
        assert_eq!(single.ssim, from_sweep.ssim);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_is_deterministic_across_thread_counts() {
        let (dir, upstream, downstream) = tiny_setup("threads");
        let ds = load(&dir).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let pipeline = Pipeline::new(&upstream, &downstream, 16, 77).unwrap();
                let report = pipeline.run_sweep(&ds).unwrap();
                (sweep_report_csv(&report), scatter_csv(&report))
            })
        };
        let (report1, scatter1) = run(1);
        let (report4, scatter4) = run(4);
        assert_eq!(report1, report4);
        assert_eq!(scatter1, scatter4);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn zero_variance_override_collapses_propagated_uncertainty() {
        let (dir, upstream, downstream) = tiny_setup("collapse");
        let ds = load(&dir).unwrap();
        let pipeline = Pipeline::new(&upstream, &downstream, 32, 5)
            .unwrap()
            .with_zero_variance_override(true);
        let eval = ds.split(Split::Eval);
        let record = pipeline.run_example(eval[0], 0).unwrap();
        match record.outcome {
            ExampleOutcome::Classification { joint, .. } => {
                assert!(joint.mutual_info.abs() <= 1e-9, "mi = {}", joint.mutual_info);
            }
            _ => unreachable!(),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn full_mask_zero_noise_identity_upstream_reconstructs() {
        // fully sampled, noiseless input to an identity-trained upstream:
        // the mean image matches the ground truth almost perfectly
        let dir = tmpdir("identity");
        let spec = DatasetSpec {
            size: 16,
            eval_count: 2,
            train_count: 32,
            noise_std: 0.0,
            seed: 21,
            masks: vec![MaskPair {
                acceleration: 1.0,
                center_fraction: 0.16,
            }],
        };
        generate(&dir, &spec).unwrap();
        let ds = load(&dir).unwrap();
        let up_pairs: Vec<(Image, Image)> = ds
            .split(Split::TrainUpstream)
            .iter()
            .map(|e| {
                let recon = zero_filled_recon(&e.undersampled(0).unwrap());
                (recon, e.image.clone())
            })
            .collect();
        let up_spec = MlpSpec {
            input: 256,
            hidden: vec![8],
            activation: Activation::Relu,
            head: HeadKind::ImageGaussian {
                height: 16,
                width: 16,
                residual_mean: true,
            },
        };
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 150,
            batch_size: 8,
            seed: 6,
            ..TrainConfig::default()
        };
        let upstream = train_upstream(&up_pairs, &up_spec, &cfg).unwrap().checkpoint;
        let down_spec = MlpSpec {
            input: 256,
            hidden: vec![4],
            activation: Activation::Relu,
            head: HeadKind::Softmax { classes: 2 },
        };
        let downstream = Checkpoint::new(
            &Mlp::init(down_spec, &SeedSpec::new(1, 1)).unwrap(),
            CheckpointMeta::for_input(16, 16),
        );
        let pipeline = Pipeline::new(&upstream, &downstream, 8, 3).unwrap();
        let record = pipeline.run_example(ds.split(Split::Eval)[0], 0).unwrap();
        assert!(record.ssim > 0.99, "ssim {}", record.ssim);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn single_example_sweep_row_equals_example_record() {
        let (dir, upstream, downstream) = tiny_setup("single");
        let mut ds = load(&dir).unwrap();
        // shrink to one eval example and one mask pair
        ds.examples.retain(|e| e.id == 0);
        ds.manifest.masks.truncate(1);
        for e in &mut ds.examples {
            e.mask_specs.truncate(1);
        }
        let pipeline = Pipeline::new(&upstream, &downstream, 16, 77).unwrap();
        let report = pipeline.run_sweep(&ds).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.records.len(), 1);
        let record = pipeline.run_example(&ds.examples[0], 0).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.ssim_mean, record.ssim);
        assert_eq!(row.sqrt_mean_var_x, record.mean_var_x.sqrt());
        match (&row.task_cols, &record.outcome) {
            (
                TaskColumns::Classification {
                    mean_entropy,
                    mean_mutual_info,
                    ..
                },
                ExampleOutcome::Classification { joint, .. },
            ) => {
                assert_eq!(*mean_entropy, joint.entropy);
                assert_eq!(*mean_mutual_info, joint.mutual_info);
            }
            _ => unreachable!(),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn incompatible_checkpoints_rejected() {
        let (dir, upstream, downstream) = tiny_setup("compat");
        // downstream expecting a different input size
        let bad_spec = MlpSpec {
            input: 64,
            hidden: vec![4],
            activation: Activation::Relu,
            head: HeadKind::Softmax { classes: 2 },
        };
        let bad = Checkpoint::new(
            &Mlp::init(bad_spec, &SeedSpec::new(0, 0)).unwrap(),
            CheckpointMeta::for_input(8, 8),
        );
        assert!(Pipeline::new(&upstream, &bad, 16, 0).is_err());
        // swapping roles fails head validation
        assert!(Pipeline::new(&downstream, &downstream, 16, 0).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sig4_formatting() {
        assert_eq!(fmt_sig4(0.0), "0");
        assert_eq!(fmt_sig4(63.8122), "63.81");
        assert_eq!(fmt_sig4(0.064234), "0.06423");
        assert_eq!(fmt_sig4(1010.3), "1010");
        assert_eq!(fmt_sig4(2.0), "2.000");
        assert_eq!(fmt_sig4(-0.5), "-0.5000");
    }
}
