//! Command implementations. Every command is a pure function of the config
//! document and the artifacts already in the output directory.

use std::path::{Path, PathBuf};

use uncprop_core::checkpoint::Checkpoint;
use uncprop_core::dataset;
use uncprop_core::dataset::Split;
use uncprop_core::error::{Error, Result};
use uncprop_core::image::Image;
use uncprop_core::pipeline::{
    scatter_csv, sweep_report_csv, Pipeline, RunManifest, Task,
};
use uncprop_core::synth::zero_filled_recon;
use uncprop_core::training::{
    epoch_log_csv, train_downstream_classification, train_downstream_regression, train_upstream,
    TrainResult,
};

use crate::config::RunConfig;

/// Flag overrides applied on top of the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mc_samples: Option<usize>,
    pub out: Option<PathBuf>,
}

pub struct Context {
    pub config: RunConfig,
    pub config_bytes: Vec<u8>,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
}

impl Context {
    pub fn new(config_path: &Path, overrides: Overrides) -> Result<Self> {
        let config = RunConfig::load(config_path)?;
        let config_bytes = std::fs::read(config_path)?;
        let out_dir = overrides
            .out
            .clone()
            .unwrap_or_else(|| config.output_dir.clone());
        Ok(Self {
            config,
            config_bytes,
            out_dir,
            overrides,
        })
    }

    fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    fn mc_samples(&self) -> usize {
        self.overrides.mc_samples.unwrap_or(self.config.mc.samples)
    }

    fn mc_seed(&self) -> u64 {
        self.overrides.seed.unwrap_or(self.config.mc.seed)
    }

    /// Archive the config document next to the artifacts it produced.
    fn archive_config(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join("config.json"), &self.config_bytes)?;
        Ok(())
    }
}

pub fn cmd_synth(ctx: &Context) -> Result<()> {
    ctx.archive_config()?;
    let dir = ctx.dataset_dir();
    let manifest = dataset::generate(&dir, &ctx.config.dataset_spec())?;
    let checksum = dataset::manifest_checksum(&dir)?;
    println!(
        "dataset: {} examples ({} eval) at {}",
        manifest.examples.len(),
        ctx.config.dataset.count,
        dir.display()
    );
    println!("manifest checksum: {checksum:016x}");
    Ok(())
}

/// Training pairs for one split: every example under every mask pair,
/// zero-filled reconstruction as the degraded input.
fn recon_inputs(ds: &dataset::Dataset, split: Split) -> Result<Vec<(Image, &dataset::LoadedExample)>> {
    let mut out = Vec::new();
    for example in ds.split(split) {
        for mask_index in 0..ds.manifest.masks.len() {
            let sample = example.undersampled(mask_index)?;
            out.push((zero_filled_recon(&sample), example));
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("training split"));
    }
    Ok(out)
}

pub fn cmd_train_upstream(ctx: &Context) -> Result<()> {
    ctx.archive_config()?;
    let ds = dataset::load(&ctx.dataset_dir())?;
    let pairs: Vec<(Image, Image)> = recon_inputs(&ds, Split::TrainUpstream)?
        .into_iter()
        .map(|(recon, example)| (recon, example.image.clone()))
        .collect();
    let result = train_upstream(&pairs, &ctx.config.upstream_spec(), &ctx.config.train)?;
    finish_training(ctx, result, "upstream")
}

pub fn cmd_train_downstream(ctx: &Context) -> Result<()> {
    ctx.archive_config()?;
    let upstream_path = ctx.out_dir.join("upstream.ckpt");
    let upstream = Checkpoint::load(&upstream_path)?;
    let ds = dataset::load(&ctx.dataset_dir())?;
    let inputs = recon_inputs(&ds, Split::TrainDownstream)?;
    let spec = ctx.config.downstream_spec();
    let result = match ctx.config.task {
        Task::Regression => {
            let pairs: Vec<(Image, f64)> = inputs
                .into_iter()
                .map(|(recon, example)| (recon, example.area))
                .collect();
            train_downstream_regression(&upstream, &pairs, &spec, &ctx.config.train)?
        }
        Task::Classification => {
            let pairs: Vec<(Image, usize)> = inputs
                .into_iter()
                .map(|(recon, example)| (recon, example.side.class_index()))
                .collect();
            train_downstream_classification(&upstream, &pairs, &spec, &ctx.config.train)?
        }
    };
    finish_training(ctx, result, "downstream")
}

fn finish_training(ctx: &Context, result: TrainResult, stage: &str) -> Result<()> {
    let ckpt_path = ctx.out_dir.join(format!("{stage}.ckpt"));
    result.checkpoint.save(&ckpt_path)?;
    std::fs::write(
        ctx.out_dir.join(format!("{stage}_train_log.csv")),
        epoch_log_csv(&result.log),
    )?;
    let first = result.log.first().map(|l| l.train_nll).unwrap_or(f64::NAN);
    let last = result.log.last().map(|l| l.train_nll).unwrap_or(f64::NAN);
    println!(
        "{stage}: {} epochs, train nll {first:.4} -> {last:.4}, checkpoint {} (checksum {:016x})",
        result.log.len(),
        ckpt_path.display(),
        result.checkpoint.checksum()?,
    );
    Ok(())
}

pub fn cmd_evaluate(ctx: &Context) -> Result<()> {
    ctx.archive_config()?;
    let ds = dataset::load(&ctx.dataset_dir())?;
    let upstream = Checkpoint::load(&ctx.out_dir.join("upstream.ckpt"))?;
    let downstream = Checkpoint::load(&ctx.out_dir.join("downstream.ckpt"))?;
    let pipeline = Pipeline::new(&upstream, &downstream, ctx.mc_samples(), ctx.mc_seed())?;
    if pipeline.task() != ctx.config.task {
        return Err(Error::Config(format!(
            "config task is {} but the downstream checkpoint is {}",
            ctx.config.task,
            pipeline.task()
        )));
    }
    let report = pipeline.run_sweep(&ds)?;

    std::fs::write(ctx.out_dir.join("sweep_report.csv"), sweep_report_csv(&report))?;
    std::fs::write(ctx.out_dir.join("scatter.csv"), scatter_csv(&report))?;
    let manifest = RunManifest {
        task: report.task,
        mc_samples: ctx.mc_samples(),
        master_seed: ctx.mc_seed(),
        dataset_checksum: dataset::manifest_checksum(&ctx.dataset_dir())?,
        upstream_checksum: upstream.checksum()?,
        downstream_checksum: downstream.checksum()?,
        masks: ds.manifest.masks.clone(),
        report_rows: report.rows.len(),
        scatter_rows: report.records.len(),
        config: serde_json::from_slice(&ctx.config_bytes)?,
    };
    std::fs::write(
        ctx.out_dir.join("run_manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    println!(
        "evaluate: {} rows, {} scatter records -> {}",
        report.rows.len(),
        report.records.len(),
        ctx.out_dir.display()
    );
    for line in sweep_report_csv(&report).lines() {
        println!("  {line}");
    }
    Ok(())
}

pub fn cmd_report(ctx: &Context) -> Result<()> {
    let report_path = ctx.out_dir.join("sweep_report.csv");
    if !report_path.exists() {
        return Err(Error::MissingArtifact(report_path));
    }
    let manifest_path = ctx.out_dir.join("run_manifest.json");
    if manifest_path.exists() {
        let manifest: RunManifest = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
        println!(
            "task {} | T = {} | seed {} | dataset {:016x}",
            manifest.task, manifest.mc_samples, manifest.master_seed, manifest.dataset_checksum
        );
    }
    let body = std::fs::read_to_string(&report_path)?;
    let mut lines = body.lines();
    if let Some(header) = lines.next() {
        let cols: Vec<&str> = header.split(',').collect();
        println!("{}", cols.join("\t"));
        for line in lines {
            println!("{}", line.split(',').collect::<Vec<_>>().join("\t"));
        }
    }
    Ok(())
}
