//! Multiscale descriptor assembly: evolve the image through the implicit
//! diffusion operator, encode every evolved image at every (P, R)
//! neighborhood, concatenate the L1-normalized histograms.
//!
//! Layout is time-major: one block per time step, each block holding the
//! normalized histograms of the configured neighborhoods in order. At the
//! defaults (50 steps, neighborhoods (8,1), (16,2), (24,3), (24,4)) a block
//! is 10+18+26+26 = 80 values and the descriptor has 4000 components.

use std::path::Path;

use crate::diffusion::{diffusion_step_with_coefficients, SolverParams};
use crate::error::{Error, Result};
use crate::grid::{GrayImage, MeshParams};
use crate::lbp::{lbp_histogram, LbpConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig<T> {
    /// Number of encoded time steps N.
    pub steps: usize,
    pub mesh: MeshParams<T>,
    pub solver: SolverParams<T>,
    pub lbp_set: Vec<LbpConfig>,
    /// When true the untransformed image opens the sequence and the encoded
    /// states are `U_0 .. U_{N-1}`; when false they are `U_1 .. U_N`.
    pub include_t0: bool,
}

impl<T: Real> DescriptorConfig<T> {
    pub fn new(
        steps: usize,
        mesh: MeshParams<T>,
        solver: SolverParams<T>,
        lbp_set: Vec<LbpConfig>,
        include_t0: bool,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter(
                "descriptor step count must be >= 1".into(),
            ));
        }
        if lbp_set.is_empty() {
            return Err(Error::InvalidParameter(
                "descriptor needs at least one LBP neighborhood".into(),
            ));
        }
        Ok(DescriptorConfig {
            steps,
            mesh,
            solver,
            lbp_set,
            include_t0,
        })
    }

    /// Length of one per-time-step block.
    pub fn block_len(&self) -> usize {
        self.lbp_set.iter().map(LbpConfig::bins).sum()
    }

    /// Total descriptor length: `steps * block_len`.
    pub fn len(&self) -> usize {
        self.steps * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Real> Default for DescriptorConfig<T> {
    fn default() -> Self {
        DescriptorConfig {
            steps: 50,
            mesh: MeshParams::default(),
            solver: SolverParams::default(),
            lbp_set: LbpConfig::standard_set(),
            include_t0: true,
        }
    }
}

/// Concatenated multiscale feature vector of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T> {
    pub values: Vec<T>,
    block_len: usize,
}

impl<T: Real> Descriptor<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-time-step blocks in order.
    pub fn blocks(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.block_len)
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }
}

/// Extracts the full descriptor. Deterministic: identical inputs produce
/// bit-identical vectors.
pub fn extract_descriptor<T: Real>(
    img: &GrayImage<T>,
    cfg: &DescriptorConfig<T>,
) -> Result<Descriptor<T>> {
    let largest_margin = cfg
        .lbp_set
        .iter()
        .map(LbpConfig::margin)
        .max()
        .expect("config validated nonempty");
    if img.rows() <= 2 * largest_margin || img.cols() <= 2 * largest_margin {
        return Err(Error::EmptyRegion {
            rows: img.rows(),
            cols: img.cols(),
            radius: largest_margin as f64,
        });
    }

    let ones = GrayImage::new(img.rows(), img.cols(), T::one())?;
    let mut values = Vec::with_capacity(cfg.len());
    let mut current = if cfg.include_t0 {
        img.clone()
    } else {
        diffusion_step_with_coefficients(img, &cfg.mesh, &cfg.solver, &ones)?
    };
    for step in 0..cfg.steps {
        if step > 0 {
            current = diffusion_step_with_coefficients(&current, &cfg.mesh, &cfg.solver, &ones)?;
        }
        for lbp_cfg in &cfg.lbp_set {
            let hist = lbp_histogram(&current, lbp_cfg)?;
            values.extend(hist.normalized::<T>());
        }
    }
    Ok(Descriptor {
        values,
        block_len: cfg.block_len(),
    })
}

/// Writes one descriptor row per image: path first, then the components in
/// full precision.
pub fn write_features_csv<T: Real>(
    path: &Path,
    rows: &[(String, Vec<T>)],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (name, values) in rows {
        let mut record = Vec::with_capacity(values.len() + 1);
        record.push(name.clone());
        record.extend(values.iter().map(|v| format!("{v}")));
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a features CSV back as `f64` rows.
pub fn read_features_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let mut fields = record.iter();
        let name = fields
            .next()
            .ok_or_else(|| Error::parse(path, "empty CSV record"))?
            .to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("bad value {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((name, values));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e.to_string())
}
