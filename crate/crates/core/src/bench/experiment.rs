//! End-to-end experiment runner: descriptors (with an on-disk cache), per-split
//! fit/predict, accuracy statistics and the step-count sweep.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::RealField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::dataset::{Dataset, Sample};
use crate::bench::split::{make_splits, SplitProtocol};
use crate::config::PipelineConfig;
use crate::descriptor::{extract_descriptor, DescriptorConfig};
use crate::error::{Error, Result};
use crate::features::{choose_components, kl_fit, lda_fit, lda_predict};
use crate::image_io::load_image;
use crate::scalar::Real;

/// Fraction of training variance the retained KL components must explain.
const VARIANCE_FRACTION: f64 = 0.99;

const CACHE_MAGIC: &[u8; 8] = b"PPTEXDS1";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Content-addressed descriptor cache directory.
    pub cache_dir: Option<PathBuf>,
    /// Worker pool size for descriptor extraction; `None` uses the available
    /// parallelism. Results are assembled in dataset order either way.
    pub jobs: Option<usize>,
}

/// Everything needed to reproduce a run; embedded in every report and written
/// next to the result CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub dataset_root: String,
    pub dataset_name: String,
    pub layout: String,
    pub pipeline: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_steps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub per_rep_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Aggregated over repetitions; row-major, rows = true class.
    pub confusion: Vec<u64>,
    pub class_names: Vec<String>,
    pub config: RunSnapshot,
}

impl ExperimentReport {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total_predictions(&self) -> u64 {
        self.confusion.iter().sum()
    }

    /// Trace over total of the aggregated confusion matrix.
    pub fn aggregate_accuracy(&self) -> f64 {
        let n = self.n_classes();
        let trace: u64 = (0..n).map(|c| self.confusion[c * n + c]).sum();
        trace as f64 / self.total_predictions() as f64
    }
}

/// Runs the full protocol with default options (no cache, default pool).
pub fn run_experiment<T: Real + RealField>(
    ds: &Dataset,
    proto: &SplitProtocol,
    cfg: &DescriptorConfig<T>,
) -> Result<ExperimentReport> {
    run_experiment_with(ds, proto, cfg, &RunOptions::default())
}

pub fn run_experiment_with<T: Real + RealField>(
    ds: &Dataset,
    proto: &SplitProtocol,
    cfg: &DescriptorConfig<T>,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let descriptors = compute_descriptors(ds, cfg, opts)?;
    run_on_descriptors(ds, proto, cfg, &descriptors)
}

/// Fit/predict over precomputed descriptors (one per dataset sample, in
/// dataset order).
pub fn run_on_descriptors<T: Real + RealField>(
    ds: &Dataset,
    proto: &SplitProtocol,
    cfg: &DescriptorConfig<T>,
    descriptors: &[Vec<T>],
) -> Result<ExperimentReport> {
    if descriptors.len() != ds.samples.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.samples.len(),
            got: descriptors.len(),
        });
    }
    let splits = make_splits(ds, proto)?;
    let n_classes = ds.n_classes();
    let mut confusion = vec![0u64; n_classes * n_classes];
    let mut per_rep_accuracy = Vec::with_capacity(splits.len());

    for (rep, split) in splits.iter().enumerate() {
        let in_context = |e: Error| Error::Experiment {
            context: format!("split {rep}"),
            message: e.to_string(),
        };

        let train_rows: Vec<&[T]> = split.train.iter().map(|&i| descriptors[i].as_slice()).collect();
        let train_labels: Vec<usize> =
            split.train.iter().map(|&i| ds.samples[i].class_id).collect();

        let kl = kl_fit(&train_rows).map_err(in_context)?;
        let cap = split.train.len().saturating_sub(n_classes).max(1);
        let k = choose_components(&kl, VARIANCE_FRACTION, cap).map_err(in_context)?;

        let projected_train: Vec<Vec<T>> = train_rows
            .iter()
            .map(|r| kl.project(r, k))
            .collect::<Result<_>>()
            .map_err(in_context)?;
        let lda = lda_fit(&projected_train, &train_labels).map_err(in_context)?;

        let mut correct = 0usize;
        for &idx in &split.test {
            let projected = kl.project(&descriptors[idx], k).map_err(in_context)?;
            let predicted = lda_predict(&lda, &projected).map_err(in_context)?;
            let truth = ds.samples[idx].class_id;
            confusion[truth * n_classes + predicted] += 1;
            if predicted == truth {
                correct += 1;
            }
        }
        per_rep_accuracy.push(correct as f64 / split.test.len() as f64);
    }

    let mean = per_rep_accuracy.iter().sum::<f64>() / per_rep_accuracy.len() as f64;
    // Population standard deviation: a single repetition reports 0.
    let variance = per_rep_accuracy
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / per_rep_accuracy.len() as f64;

    Ok(ExperimentReport {
        per_rep_accuracy,
        mean_accuracy: mean,
        std_accuracy: variance.sqrt(),
        confusion,
        class_names: ds.class_names.clone(),
        config: RunSnapshot {
            dataset_root: ds.root.display().to_string(),
            dataset_name: ds.name.clone(),
            layout: ds.layout.name().to_string(),
            pipeline: PipelineConfig::from_parts(
                cfg,
                proto.kind,
                proto.repetitions,
                proto.seed,
                proto.k,
                &proto.train_groups,
            ),
            sweep_steps: None,
        },
    })
}

/// Accuracy for a range of step counts N. Descriptors are computed once at
/// the largest N; smaller counts reuse their time-major prefix.
pub fn sweep_steps<T: Real + RealField>(
    ds: &Dataset,
    proto: &SplitProtocol,
    cfg: &DescriptorConfig<T>,
    n_values: &[usize],
    opts: &RunOptions,
) -> Result<Vec<(usize, ExperimentReport)>> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one N".into()));
    }
    if n_values.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("sweep N values must be >= 1".into()));
    }
    let n_max = *n_values.iter().max().unwrap();
    let mut cfg_max = cfg.clone();
    cfg_max.steps = n_max;
    let descriptors = compute_descriptors(ds, &cfg_max, opts)?;

    let block = cfg.block_len();
    let mut out = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut cfg_n = cfg.clone();
        cfg_n.steps = n;
        let sliced: Vec<Vec<T>> = descriptors.iter().map(|d| d[..n * block].to_vec()).collect();
        let mut report = run_on_descriptors(ds, proto, &cfg_n, &sliced)?;
        report.config.sweep_steps = Some(n_values.to_vec());
        out.push((n, report));
    }
    Ok(out)
}

/// Extracts (or loads from cache) one descriptor per dataset sample, in
/// dataset order. Extraction runs on a fixed-size worker pool; assembly
/// order is independent of completion order.
pub fn compute_descriptors<T: Real + RealField>(
    ds: &Dataset,
    cfg: &DescriptorConfig<T>,
    opts: &RunOptions,
) -> Result<Vec<Vec<T>>> {
    if let Some(dir) = &opts.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let fingerprint = config_fingerprint(cfg);
    let work = |sample: &Sample| -> Result<Vec<T>> {
        descriptor_for(sample, cfg, &fingerprint, opts.cache_dir.as_deref())
    };

    match opts.jobs {
        Some(1) => ds.samples.iter().map(work).collect(),
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(|| ds.samples.par_iter().map(work).collect())
        }
        None => ds.samples.par_iter().map(work).collect(),
    }
}

fn descriptor_for<T: Real>(
    sample: &Sample,
    cfg: &DescriptorConfig<T>,
    fingerprint: &str,
    cache_dir: Option<&Path>,
) -> Result<Vec<T>> {
    let cache_path = match cache_dir {
        Some(dir) => {
            let key = cache_key(&sample.path, fingerprint)?;
            let path = dir.join(format!("{key}.desc"));
            if let Some(values) = read_cache(&path, cfg.len()) {
                return Ok(values);
            }
            Some(path)
        }
        None => None,
    };

    let img = load_image(&sample.path)?;
    let descriptor = extract_descriptor(&img, cfg).map_err(|e| Error::Experiment {
        context: sample.path.display().to_string(),
        message: e.to_string(),
    })?;
    if let Some(path) = cache_path {
        write_cache(&path, &descriptor.values)?;
    }
    Ok(descriptor.values)
}

/// Cache key: SHA-256 over the image bytes and the configuration fingerprint.
fn cache_key(path: &Path, fingerprint: &str) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update([0u8]);
    hasher.update(fingerprint.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

/// Stable textual identity of every parameter that changes descriptor values.
/// Float parameters contribute their exact bit patterns.
fn config_fingerprint<T: Real>(cfg: &DescriptorConfig<T>) -> String {
    let bits = |v: T| v.to_f64_lossy().to_bits();
    let mut s = format!(
        "v1;steps={};t0={};dx={:016x};dy={:016x};dt={:016x};tau={:016x};tol={:016x};maxit={}",
        cfg.steps,
        cfg.include_t0,
        bits(cfg.mesh.dx),
        bits(cfg.mesh.dy),
        bits(cfg.mesh.dt),
        bits(cfg.mesh.tau),
        bits(cfg.solver.tol),
        cfg.solver.max_iter,
    );
    for lbp in &cfg.lbp_set {
        s.push_str(&format!(";p={},r={:016x}", lbp.p, lbp.r.to_bits()));
    }
    s
}

fn read_cache<T: Real>(path: &Path, expected_len: usize) -> Option<Vec<T>> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
        return None;
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().ok()?) as usize;
    if len != expected_len || bytes.len() != 16 + 8 * len {
        return None;
    }
    let mut values = Vec::with_capacity(len);
    for chunk in bytes[16..].chunks_exact(8) {
        values.push(T::from_f64_lossy(f64::from_le_bytes(
            chunk.try_into().ok()?,
        )));
    }
    Some(values)
}

fn write_cache<T: Real>(path: &Path, values: &[T]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + 8 * values.len());
    bytes.extend_from_slice(CACHE_MAGIC);
    bytes.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    // Unique temp name + rename: concurrent workers may race on one key.
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
