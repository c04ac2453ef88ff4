//! On-disk dataset layout.
//!
//! A dataset directory contains:
//!
//! ```text
//! manifest.json     versioned manifest: generation seed, size, mask pairs,
//!                   one entry per example with file names, labels, seeds
//! labels.csv        id, area, side
//! images/img_NNNNN.bin    ground-truth phantom   (real image format)
//! kspace/ks_NNNNN.bin     full noisy k-space     (complex image format)
//! ```
//!
//! Binary image files are flat little-endian payloads with a shape header:
//! 8-byte magic (`UNCPIMG1` real / `UNCPKSP1` complex), height and width as
//! u32, the f64 payload (real plane, then imaginary for complex), and a
//! trailing FNV-1a 64 checksum of all preceding bytes.
//!
//! Undersampled views are not stored: masks are regenerated from the seeds
//! recorded in the manifest, so `(seed, size, count)` fully determine every
//! derived artifact.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::fnv1a64;
use crate::error::{Error, Result};
use crate::image::{ComplexImage, Image};
use crate::rng::SeedSpec;
use crate::synth::{make_phantom, to_kspace, KSpaceSample, MaskSpec, Side};

const MANIFEST_VERSION: u32 = 1;
const IMG_MAGIC: &[u8; 8] = b"UNCPIMG1";
const KSP_MAGIC: &[u8; 8] = b"UNCPKSP1";

/// Which stage an example belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Eval,
    TrainUpstream,
    TrainDownstream,
}

/// Acceleration / center-fraction pair from the sweep configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    pub acceleration: f64,
    pub center_fraction: f64,
}

/// Generation parameters for a dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub size: usize,
    pub eval_count: usize,
    pub train_count: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub masks: Vec<MaskPair>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eval_count == 0 {
            return Err(Error::Config("dataset count must be positive".into()));
        }
        if self.size < 16 {
            return Err(Error::Config(format!(
                "phantom size must be >= 16, got {}",
                self.size
            )));
        }
        if self.masks.is_empty() {
            return Err(Error::Config("at least one (R, c) mask pair required".into()));
        }
        for pair in &self.masks {
            // validate against the mask law early, naming the offending row
            let spec = MaskSpec {
                acceleration: pair.acceleration,
                center_fraction: pair.center_fraction,
                width: self.size,
                seed: SeedSpec::new(0, 0),
            };
            spec.validate().map_err(|e| {
                Error::Config(format!(
                    "mask pair (R = {}, c = {}): {e}",
                    pair.acceleration, pair.center_fraction
                ))
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestExample {
    pub id: usize,
    pub split: Split,
    pub image_file: String,
    pub kspace_file: String,
    pub area: f64,
    pub side: Side,
    pub noise_seed: SeedSpec,
    /// One mask seed per manifest-level mask pair.
    pub mask_seeds: Vec<SeedSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub size: usize,
    pub noise_std: f64,
    pub masks: Vec<MaskPair>,
    pub examples: Vec<ManifestExample>,
}

/// One example loaded into memory.
#[derive(Debug, Clone)]
pub struct LoadedExample {
    pub id: usize,
    pub split: Split,
    pub image: Image,
    pub kspace_full: ComplexImage,
    pub area: f64,
    pub side: Side,
    pub mask_specs: Vec<MaskSpec>,
    pub noise_std: f64,
}

impl LoadedExample {
    /// The undersampled pipeline input for mask pair `mask_index`.
    pub fn undersampled(&self, mask_index: usize) -> Result<KSpaceSample> {
        let spec = *self.mask_specs.get(mask_index).ok_or(Error::InvalidParam {
            name: "mask_index",
            reason: format!(
                "index {mask_index} out of range ({} masks)",
                self.mask_specs.len()
            ),
        })?;
        KSpaceSample::undersample(&self.kspace_full, spec, self.noise_std)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub examples: Vec<LoadedExample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&LoadedExample> {
        self.examples.iter().filter(|e| e.split == split).collect()
    }
}

/// Seed tree: every derived stream forks off the dataset master seed.
fn example_root(master: u64, id: usize) -> SeedSpec {
    SeedSpec::new(master, 0).fork(id as u64)
}

fn phantom_seed(master: u64, id: usize) -> SeedSpec {
    example_root(master, id).fork(0)
}

fn noise_seed(master: u64, id: usize) -> SeedSpec {
    example_root(master, id).fork(1)
}

fn mask_seed(master: u64, id: usize, pair: &MaskPair) -> SeedSpec {
    example_root(master, id)
        .fork(2)
        .fork(pair.acceleration.to_bits())
        .fork(pair.center_fraction.to_bits())
}

/// Per-example Monte Carlo seed for evaluation, keyed by `(example, R)` so
/// sweep ordering cannot matter.
pub fn mc_seed(master: u64, id: usize, acceleration: f64) -> SeedSpec {
    example_root(master, id).fork(3).fork(acceleration.to_bits())
}

/// Generate a dataset directory. Deterministic and idempotent per spec:
/// rerunning with the same spec rewrites identical bytes.
pub fn generate(dir: &Path, spec: &DatasetSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("kspace"))?;

    let total = spec.eval_count + spec.train_count;
    let entries: Vec<ManifestExample> = (0..total)
        .into_par_iter()
        .map(|id| -> Result<ManifestExample> {
            let split = if id < spec.eval_count {
                Split::Eval
            } else if id < spec.eval_count + spec.train_count / 2 {
                Split::TrainUpstream
            } else {
                Split::TrainDownstream
            };
            let phantom = make_phantom(&phantom_seed(spec.seed, id), spec.size)?;
            let noise = noise_seed(spec.seed, id);
            let kspace = to_kspace(&phantom.image, spec.noise_std, &noise)?;
            let image_file = format!("images/img_{id:05}.bin");
            let kspace_file = format!("kspace/ks_{id:05}.bin");
            write_image(&dir.join(&image_file), &phantom.image)?;
            write_complex(&dir.join(&kspace_file), &kspace)?;
            Ok(ManifestExample {
                id,
                split,
                image_file,
                kspace_file,
                area: phantom.area,
                side: phantom.side,
                noise_seed: noise,
                mask_seeds: spec
                    .masks
                    .iter()
                    .map(|pair| mask_seed(spec.seed, id, pair))
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        seed: spec.seed,
        size: spec.size,
        noise_std: spec.noise_std,
        masks: spec.masks.clone(),
        examples: entries,
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;

    let mut labels = String::from("id,area,side\n");
    for e in &manifest.examples {
        labels.push_str(&format!("{},{},{}\n", e.id, e.area, e.side));
    }
    std::fs::write(dir.join("labels.csv"), labels)?;
    Ok(manifest)
}

/// Load a dataset directory, verifying file checksums.
pub fn load(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingArtifact(manifest_path));
    }
    let manifest: DatasetManifest =
        serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let examples: Vec<LoadedExample> = manifest
        .examples
        .par_iter()
        .map(|e| -> Result<LoadedExample> {
            let image = read_image(&dir.join(&e.image_file))?;
            let kspace_full = read_complex(&dir.join(&e.kspace_file))?;
            let mask_specs = manifest
                .masks
                .iter()
                .zip(&e.mask_seeds)
                .map(|(pair, seed)| MaskSpec {
                    acceleration: pair.acceleration,
                    center_fraction: pair.center_fraction,
                    width: manifest.size,
                    seed: *seed,
                })
                .collect();
            Ok(LoadedExample {
                id: e.id,
                split: e.split,
                image,
                kspace_full,
                area: e.area,
                side: e.side,
                mask_specs,
                noise_std: manifest.noise_std,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { manifest, examples })
}

/// Checksum of the manifest file, for idempotence checks and run manifests.
pub fn manifest_checksum(dir: &Path) -> Result<u64> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    Ok(fnv1a64(&std::fs::read(path)?))
}

fn write_payload(path: &Path, magic: &[u8; 8], h: usize, w: usize, planes: &[&[f64]]) -> Result<()> {
    let mut out = Vec::with_capacity(24 + planes.iter().map(|p| 8 * p.len()).sum::<usize>());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for plane in planes {
        for v in *plane {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&fnv1a64(&out).to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

fn read_payload(path: &Path, magic: &[u8; 8], planes: usize) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    let bad = |why: &str| Error::Dataset(format!("{}: {why}", path.display()));
    if bytes.len() < 24 {
        return Err(bad("file truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if u64::from_le_bytes(tail.try_into().unwrap()) != fnv1a64(body) {
        return Err(bad("checksum mismatch"));
    }
    if &body[..8] != magic {
        return Err(bad("bad magic"));
    }
    let h = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
    let expected = 16 + planes * h * w * 8;
    if body.len() != expected {
        return Err(bad("payload length mismatch"));
    }
    let mut out = Vec::with_capacity(planes);
    for p in 0..planes {
        let start = 16 + p * h * w * 8;
        out.push(
            body[start..start + h * w * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    Ok((h, w, out))
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    write_payload(path, IMG_MAGIC, image.height(), image.width(), &[image.as_slice()])
}

pub fn read_image(path: &Path) -> Result<Image> {
    let (h, w, mut planes) = read_payload(path, IMG_MAGIC, 1)?;
    Image::from_vec(h, w, planes.pop().expect("one plane"))
}

pub fn write_complex(path: &Path, image: &ComplexImage) -> Result<()> {
    write_payload(path, KSP_MAGIC, image.height(), image.width(), &[&image.re, &image.im])
}

pub fn read_complex(path: &Path) -> Result<ComplexImage> {
    let (h, w, mut planes) = read_payload(path, KSP_MAGIC, 2)?;
    let im = planes.pop().expect("two planes");
    let re = planes.pop().expect("two planes");
    let mut out = ComplexImage::zeros(h, w);
    out.re = re;
    out.im = im;
    Ok(out)
}

/// Write `PathBuf`-friendly file names for derived artifacts.
pub fn run_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
