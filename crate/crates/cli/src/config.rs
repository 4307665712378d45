//! Experiment configuration: the JSON schema driving every subcommand.

use hjbk_core::kernel::KernelFamily;
use hjbk_core::{
    CenterSet, CollocationGrid, Error, KernelSpec, Result, SimulationConfig, SolverSettings,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Point-set descriptor used for centers and collocation grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointsConfig {
    Grid {
        bounds: Vec<(f64, f64)>,
        counts: Vec<usize>,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

impl PointsConfig {
    pub fn to_center_set(&self, n: usize) -> Result<CenterSet> {
        match self {
            PointsConfig::Grid { bounds, counts } => {
                if bounds.len() != n {
                    return Err(Error::input(format!(
                        "grid bounds have dimension {}, system has {n}",
                        bounds.len()
                    )));
                }
                CenterSet::grid(bounds, counts)
            }
            PointsConfig::Explicit { points } => {
                let pts = points
                    .iter()
                    .map(|p| {
                        if p.len() != n {
                            Err(Error::input(format!(
                                "point of dimension {}, system has {n}",
                                p.len()
                            )))
                        } else {
                            Ok(nalgebra::DVector::from_vec(p.clone()))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                CenterSet::from_points(pts)
            }
        }
    }
}

/// Collocation grid: either the centers themselves or an independent set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CollocationConfig {
    SameAsCenters,
    Grid {
        bounds: Vec<(f64, f64)>,
        counts: Vec<usize>,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

impl Default for CollocationConfig {
    fn default() -> Self {
        CollocationConfig::SameAsCenters
    }
}

impl CollocationConfig {
    pub fn to_grid(&self, centers: &CenterSet, n: usize) -> Result<CollocationGrid> {
        let points = match self {
            CollocationConfig::SameAsCenters => {
                return Ok(CollocationGrid::same_as_centers(centers))
            }
            CollocationConfig::Grid { bounds, counts } => PointsConfig::Grid {
                bounds: bounds.clone(),
                counts: counts.clone(),
            },
            CollocationConfig::Explicit { points } => PointsConfig::Explicit {
                points: points.clone(),
            },
        };
        let set = points.to_center_set(n)?;
        CollocationGrid::from_points(set.points().to_vec())
    }
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in system name: poly1d, radial2d, vanderpol or stable1d.
    pub system: String,
    /// Van der Pol damping parameter (ignored by the other systems).
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Kernel family and parameters; the dimension comes from the system.
    pub kernel: KernelFamily,
    pub centers: PointsConfig,
    #[serde(default)]
    pub collocation: CollocationConfig,
    /// Optional override of the Riccati state-cost matrix Q. When absent the
    /// Hessian of q at the origin is used.
    #[serde(default)]
    pub riccati_q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub hessian_relaxation: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_mu() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::input(format!("config not found: {}", path.display())));
        }
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let model = hjbk_core::system::builtin_by_name(&self.system, self.mu)?;
        self.kernel_spec(model.n)?;
        if self.hessian_relaxation < 0.0 {
            return Err(Error::input("hessian_relaxation must be nonnegative"));
        }
        if self.riccati_q.is_some() {
            let m = self.riccati_q_matrix(model.n)?;
            if (m.clone() - m.transpose()).norm() > 1e-12 {
                return Err(Error::input("riccati_q must be symmetric"));
            }
        }
        if let Some(sim) = &self.simulation {
            sim.validate()?;
        }
        Ok(())
    }

    pub fn kernel_spec(&self, n: usize) -> Result<KernelSpec> {
        match self.kernel {
            KernelFamily::PolynomialIso { degree, offset } => {
                KernelSpec::polynomial(n, degree, offset)
            }
            KernelFamily::Gaussian { bandwidth } => KernelSpec::gaussian(n, bandwidth),
        }
    }

    pub fn riccati_q_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let rows = self
            .riccati_q
            .as_ref()
            .ok_or_else(|| Error::input("no riccati_q override present"))?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::input(format!("riccati_q must be {n}x{n}")));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}
