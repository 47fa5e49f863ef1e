//! Validated pipeline configuration: one record carrying every knob of the
//! filtering, descriptor and benchmark stages. Serialized as the config
//! snapshot embedded in reports, so a finished run can be reproduced from its
//! output directory alone.

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorConfig;
use crate::diffusion::SolverParams;
use crate::error::Result;
use crate::grid::MeshParams;
use crate::lbp::LbpConfig;
use crate::scalar::Real;

/// Train/test split strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Per class, half of the images (rounded down) go to training.
    RandomHalf,
    /// Exactly `k` training images per class.
    KPerClass,
    /// All images of the selected sample groups train; the rest test.
    GroupHoldout,
}

/// One (P, R) neighborhood entry as it appears in serialized configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpSetting {
    pub p: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    // Mesh.
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub tau: f64,
    // Solver.
    pub tol: f64,
    pub max_iter: usize,
    // Descriptor.
    pub steps: usize,
    pub lbp_set: Vec<LbpSetting>,
    pub include_t0: bool,
    // Split protocol.
    pub protocol: SplitKind,
    pub repetitions: usize,
    pub seed: u64,
    pub k_per_class: Option<usize>,
    pub train_groups: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dx: 1.0,
            dy: 1.0,
            dt: 1.0,
            tau: 5.0,
            tol: 1e-8,
            max_iter: 1000,
            steps: 50,
            lbp_set: LbpConfig::standard_set()
                .into_iter()
                .map(|c| LbpSetting { p: c.p, r: c.r })
                .collect(),
            include_t0: true,
            protocol: SplitKind::RandomHalf,
            repetitions: 10,
            seed: 0,
            k_per_class: None,
            train_groups: Vec::new(),
        }
    }
}

impl PipelineConfig {
    /// Checks every field against its module's invariants before any work
    /// starts. Returns the first violation.
    pub fn validate(&self) -> Result<()> {
        self.mesh_params::<f64>()?;
        self.solver_params::<f64>()?;
        self.descriptor_config::<f64>()?;
        if self.repetitions == 0 {
            return Err(crate::error::Error::InvalidParameter(
                "repetitions must be >= 1".into(),
            ));
        }
        if self.protocol == SplitKind::KPerClass && self.k_per_class.is_none() {
            return Err(crate::error::Error::InvalidParameter(
                "k-per-class protocol requires k".into(),
            ));
        }
        Ok(())
    }

    pub fn mesh_params<T: Real>(&self) -> Result<MeshParams<T>> {
        MeshParams::new(
            T::from_f64_lossy(self.dx),
            T::from_f64_lossy(self.dy),
            T::from_f64_lossy(self.dt),
            T::from_f64_lossy(self.tau),
        )
    }

    pub fn solver_params<T: Real>(&self) -> Result<SolverParams<T>> {
        SolverParams::new(T::from_f64_lossy(self.tol), self.max_iter)
    }

    pub fn lbp_configs(&self) -> Result<Vec<LbpConfig>> {
        self.lbp_set
            .iter()
            .map(|s| LbpConfig::new(s.p, s.r))
            .collect()
    }

    pub fn descriptor_config<T: Real>(&self) -> Result<DescriptorConfig<T>> {
        DescriptorConfig::new(
            self.steps,
            self.mesh_params()?,
            self.solver_params()?,
            self.lbp_configs()?,
            self.include_t0,
        )
    }

    /// Rebuilds the serializable record from typed module configs.
    pub fn from_parts<T: Real>(
        cfg: &DescriptorConfig<T>,
        protocol: SplitKind,
        repetitions: usize,
        seed: u64,
        k_per_class: Option<usize>,
        train_groups: &[usize],
    ) -> Self {
        PipelineConfig {
            dx: cfg.mesh.dx.to_f64_lossy(),
            dy: cfg.mesh.dy.to_f64_lossy(),
            dt: cfg.mesh.dt.to_f64_lossy(),
            tau: cfg.mesh.tau.to_f64_lossy(),
            tol: cfg.solver.tol.to_f64_lossy(),
            max_iter: cfg.solver.max_iter,
            steps: cfg.steps,
            lbp_set: cfg
                .lbp_set
                .iter()
                .map(|c| LbpSetting { p: c.p, r: c.r })
                .collect(),
            include_t0: cfg.include_t0,
            protocol,
            repetitions,
            seed,
            k_per_class,
            train_groups: train_groups.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_shipped_pipeline() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.steps, 50);
        assert_eq!(cfg.tau, 5.0);
        assert_eq!(cfg.lbp_set.len(), 4);
        let d: DescriptorConfig<f64> = cfg.descriptor_config().unwrap();
        assert_eq!(d.len(), 4000);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut cfg = PipelineConfig::default();
        cfg.steps = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.tau = -1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.protocol = SplitKind::KPerClass;
        cfg.k_per_class = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snapshot_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
