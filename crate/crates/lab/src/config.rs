//! Experiment configuration in TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use maxwell_core::coefficients::{CoefficientField, Material};
use maxwell_core::gamma::GammaMethod;
use maxwell_core::mesh::{build_box_mesh, BoxDomain, Mesh, PartitionPlane};
use maxwell_core::reference::MAX_ORDER;
use maxwell_core::spectral::EigenOptions;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; every row derives its own seed from it.
    pub seed: u64,
    /// Output directory for sweep and report files.
    pub output: PathBuf,
    pub domain: DomainConfig,
    /// One entry per subdomain, in label order.
    pub materials: Vec<MaterialConfig>,
    pub sweep: SweepConfig,
    pub gamma: GammaConfig,
    pub eigen: EigenConfig,
    pub fit: FitConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// Divisions of the level-1 mesh; level `k` uses `k` times as many.
    pub divisions: [usize; 3],
    #[serde(default)]
    pub cuts: Vec<CutConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutConfig {
    pub axis: usize,
    pub coordinate: f64,
}

/// A scalar or a full symmetric 3x3 tensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tensor {
    Scalar(f64),
    Matrix([[f64; 3]; 3]),
}

impl Tensor {
    pub fn matrix(&self) -> Matrix3<f64> {
        match *self {
            Tensor::Scalar(s) => Matrix3::identity() * s,
            Tensor::Matrix(m) => Matrix3::from_fn(|i, j| m[i][j]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub epsilon: Tensor,
    pub mu: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub frequencies: Vec<f64>,
    pub levels: Vec<usize>,
    pub orders: Vec<usize>,
    /// Uniform refinements from a coarse mesh to its reference mesh.
    pub fine_levels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Power,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub method: MethodKind,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    /// Initial number of pairs; doubled until the window brackets ω.
    pub initial: usize,
    pub tolerance: f64,
    pub max_restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Rows with `ω h / ϑ` above this value are excluded from the fit.
    pub cutoff: f64,
    /// Number of smallest-h rows per series used for the tail slope.
    pub tail: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            seed: 1,
            output: PathBuf::from("out"),
            domain: DomainConfig {
                lower: [0.0; 3],
                upper: [pi; 3],
                divisions: [1, 1, 1],
                cuts: Vec::new(),
            },
            materials: vec![MaterialConfig {
                epsilon: Tensor::Scalar(1.0),
                mu: Tensor::Scalar(1.0),
            }],
            sweep: SweepConfig {
                frequencies: vec![1.0],
                levels: vec![1, 2, 3],
                orders: vec![0],
                fine_levels: 2,
            },
            gamma: GammaConfig {
                method: MethodKind::Power,
                max_iterations: 200,
                tolerance: 1e-6,
                samples: 16,
            },
            eigen: EigenConfig {
                initial: 8,
                tolerance: 1e-10,
                max_restarts: 60,
            },
            fit: FitConfig {
                cutoff: 0.5,
                tail: 2,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.to_path_buf(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        // TOML integers are signed 64-bit.
        if i64::try_from(self.seed).is_err() {
            return Err(ConfigError::Invalid(format!(
                "seed {} exceeds {}",
                self.seed,
                i64::MAX
            )));
        }
        let s = &self.sweep;
        if s.frequencies.is_empty() || s.levels.is_empty() || s.orders.is_empty() {
            return Err(ConfigError::Invalid(
                "frequencies, levels and orders must be non-empty".into(),
            ));
        }
        if let Some(w) = s.frequencies.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(ConfigError::Invalid(format!(
                "frequency {w} is not positive"
            )));
        }
        if let Some(p) = s.orders.iter().find(|p| **p > MAX_ORDER) {
            return Err(ConfigError::Invalid(format!(
                "order {p} exceeds {MAX_ORDER}"
            )));
        }
        if s.levels.contains(&0) {
            return Err(ConfigError::Invalid("levels start at 1".into()));
        }
        if self.materials.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one material is required".into(),
            ));
        }
        let g = &self.gamma;
        if g.max_iterations == 0 || !(g.tolerance > 0.0) || g.samples == 0 {
            return Err(ConfigError::Invalid(
                "gamma iterations, tolerance and samples must be positive".into(),
            ));
        }
        if self.eigen.initial == 0 || !(self.eigen.tolerance > 0.0) || self.eigen.max_restarts == 0
        {
            return Err(ConfigError::Invalid(
                "eigen initial count, tolerance and restarts must be positive".into(),
            ));
        }
        if !(self.fit.cutoff > 0.0) || self.fit.tail < 2 {
            return Err(ConfigError::Invalid(
                "fit cutoff must be positive and tail at least 2".into(),
            ));
        }
        // Geometry and coefficients are checked by building the level-1 mesh.
        let mesh = self.mesh(1)?;
        self.coefficients()?
            .check_labels(mesh.n_subdomains())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn box_domain(&self) -> BoxDomain {
        BoxDomain::new(self.domain.lower, self.domain.upper)
    }

    pub fn cuts(&self) -> Vec<PartitionPlane> {
        self.domain
            .cuts
            .iter()
            .map(|c| PartitionPlane {
                axis: c.axis,
                coordinate: c.coordinate,
            })
            .collect()
    }

    pub fn divisions(&self, level: usize) -> [usize; 3] {
        self.domain.divisions.map(|d| d * level)
    }

    /// Coarse mesh of a level.
    pub fn mesh(&self, level: usize) -> Result<Mesh, ConfigError> {
        build_box_mesh(&self.box_domain(), self.divisions(level), &self.cuts())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Coarse mesh of a level and its reference refinement.
    pub fn mesh_pair(&self, level: usize) -> Result<(Arc<Mesh>, Arc<Mesh>), ConfigError> {
        let coarse = self.mesh(level)?;
        let mut fine = coarse.clone();
        for _ in 0..self.sweep.fine_levels {
            fine = fine.refine_uniform();
        }
        Ok((Arc::new(coarse), Arc::new(fine)))
    }

    pub fn coefficients(&self) -> Result<CoefficientField, ConfigError> {
        let materials: Vec<Material> = self
            .materials
            .iter()
            .map(|m| Material {
                epsilon: m.epsilon.matrix(),
                mu: m.mu.matrix(),
            })
            .collect();
        CoefficientField::new(&materials, &self.box_domain())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn gamma_method(&self) -> GammaMethod {
        match self.gamma.method {
            MethodKind::Power => GammaMethod::Power {
                max_iterations: self.gamma.max_iterations,
                tolerance: self.gamma.tolerance,
            },
            MethodKind::Sample => GammaMethod::Sample {
                count: self.gamma.samples,
            },
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tolerance: self.eigen.tolerance,
            max_restarts: self.eigen.max_restarts,
            ..EigenOptions::default()
        }
    }
}
