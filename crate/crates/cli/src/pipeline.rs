//! Shared synthesis pipeline and the value-function file format.

use crate::config::ExperimentConfig;
use hjbk_core::kernel::KernelFamily;
use hjbk_core::system::SystemModel;
use hjbk_core::{
    assemble, extract, solve, solve_are, CenterSet, CollocationGrid, ConicProgram, Error,
    KernelSpec, Result, SolverStats, ValueFunction,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub struct PipelineOutput {
    pub model: SystemModel,
    pub kernel: KernelSpec,
    pub centers: CenterSet,
    pub grid: CollocationGrid,
    pub p_target: DMatrix<f64>,
    pub riccati_residual: f64,
    pub program: ConicProgram,
    pub p: DVector<f64>,
    pub stats: SolverStats,
    pub vf: ValueFunction,
    pub solve_time_s: f64,
}

/// linearize -> solve_are -> assemble -> solve -> extract.
pub fn run_synthesis(cfg: &ExperimentConfig, solver_tol: Option<f64>) -> Result<PipelineOutput> {
    let model = hjbk_core::system::builtin_by_name(&cfg.system, cfg.mu)?;
    let kernel = cfg.kernel_spec(model.n)?;
    let centers = cfg.centers.to_center_set(model.n)?;
    let grid = cfg.collocation.to_grid(&centers, model.n)?;
    let mut lin = hjbk_core::system::linearize(&model)?;
    if cfg.riccati_q.is_some() {
        lin.q = cfg.riccati_q_matrix(model.n)?;
    }
    let riccati = solve_are(&lin, &model.d)?;
    let problem = assemble(
        &model,
        &kernel,
        &centers,
        &grid,
        &riccati.p,
        cfg.hessian_relaxation,
    )?;
    let program = hjbk_core::to_conic(&problem);
    let mut settings = cfg.solver.clone();
    if let Some(tol) = solver_tol {
        settings.tolerance = tol;
    }
    let start = std::time::Instant::now();
    let (p, stats) = solve(&program, &settings)?;
    let solve_time_s = start.elapsed().as_secs_f64();
    let vf = extract(&p, &problem)?;
    Ok(PipelineOutput {
        model,
        kernel,
        centers,
        grid,
        p_target: riccati.p.clone(),
        riccati_residual: riccati.residual_norm,
        program,
        p,
        stats,
        vf,
        solve_time_s,
    })
}

/// Serialized value function: everything needed to rebuild `ValueFunction`
/// against the named built-in system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueFunctionFile {
    pub system: String,
    pub mu: f64,
    pub kernel: KernelFamily,
    pub centers: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub p_target: Vec<Vec<f64>>,
}

impl ValueFunctionFile {
    pub fn from_pipeline(out: &PipelineOutput, cfg: &ExperimentConfig) -> Self {
        let n = out.model.n;
        let m = out.model.m;
        ValueFunctionFile {
            system: cfg.system.clone(),
            mu: cfg.mu,
            kernel: out.kernel.family.clone(),
            centers: out
                .centers
                .points()
                .iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            p: out.p.iter().copied().collect(),
            d: (0..m)
                .map(|i| (0..m).map(|j| out.model.d[(i, j)]).collect())
                .collect(),
            p_target: (0..n)
                .map(|i| (0..n).map(|j| out.p_target[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::input(format!(
                "value-function file not found: {}",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("invalid value-function file {}: {e}", path.display())))
    }

    pub fn rebuild(&self) -> Result<(SystemModel, ValueFunction, DMatrix<f64>)> {
        let model = hjbk_core::system::builtin_by_name(&self.system, self.mu)?;
        let n = model.n;
        let kernel = match self.kernel {
            KernelFamily::PolynomialIso { degree, offset } => {
                KernelSpec::polynomial(n, degree, offset)?
            }
            KernelFamily::Gaussian { bandwidth } => KernelSpec::gaussian(n, bandwidth)?,
        };
        let points = self
            .centers
            .iter()
            .map(|c| {
                if c.len() != n {
                    Err(Error::input("center dimension does not match the system"))
                } else {
                    Ok(DVector::from_vec(c.clone()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let centers = CenterSet::from_points(points)?;
        if self.p.len() != centers.len() {
            return Err(Error::input(
                "coefficient count does not match the center count",
            ));
        }
        let m = model.m;
        if self.d.len() != m || self.d.iter().any(|r| r.len() != m) {
            return Err(Error::input("stored D has the wrong dimension"));
        }
        let d = DMatrix::from_fn(m, m, |i, j| self.d[i][j]);
        if self.p_target.len() != n || self.p_target.iter().any(|r| r.len() != n) {
            return Err(Error::input("stored P has the wrong dimension"));
        }
        let p_target = DMatrix::from_fn(n, n, |i, j| self.p_target[i][j]);
        let vf = ValueFunction::new(
            DVector::from_vec(self.p.clone()),
            kernel,
            centers,
            d,
            model.g.clone(),
        )?;
        Ok((model, vf, p_target))
    }
}
