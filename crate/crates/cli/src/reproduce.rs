//! Built-in experiment presets and their acceptance gates.

use crate::config::{CollocationConfig, ExperimentConfig, PointsConfig};
use hjbk_core::kernel::KernelFamily;
use hjbk_core::{Error, IcSet, Result, SimulationConfig, SolverSettings, StepControl};
use serde::Serialize;

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let kernel = KernelFamily::PolynomialIso {
        degree: 4,
        offset: 1.0,
    };
    match name {
        "poly1d" => Ok(ExperimentConfig {
            system: "poly1d".into(),
            mu: 1.0,
            kernel,
            centers: PointsConfig::Grid {
                bounds: vec![(-1.5, 1.5)],
                counts: vec![25],
            },
            collocation: CollocationConfig::SameAsCenters,
            riccati_q: Some(vec![vec![2.0]]),
            hessian_relaxation: 0.0,
            solver: SolverSettings::default(),
            simulation: Some(SimulationConfig {
                horizon: 10.0,
                step: StepControl::Fixed { h: 1e-3 },
                initial_conditions: IcSet::List {
                    points: vec![
                        vec![-1.2],
                        vec![-0.8],
                        vec![-0.4],
                        vec![0.4],
                        vec![0.8],
                        vec![1.2],
                    ],
                },
                output_samples: 1000,
            }),
            output_dir: None,
            seed: 0,
        }),
        "radial2d" => Ok(ExperimentConfig {
            system: "radial2d".into(),
            mu: 1.0,
            kernel,
            centers: PointsConfig::Grid {
                bounds: vec![(-1.5, 1.5), (-1.5, 1.5)],
                counts: vec![10, 10],
            },
            collocation: CollocationConfig::SameAsCenters,
            riccati_q: Some(vec![vec![2.0, 0.0], vec![0.0, 2.0]]),
            hessian_relaxation: 0.0,
            solver: SolverSettings::default(),
            simulation: Some(SimulationConfig {
                horizon: 10.0,
                step: StepControl::Fixed { h: 1e-3 },
                initial_conditions: IcSet::Circle {
                    radius: 1.0,
                    count: 8,
                },
                output_samples: 1000,
            }),
            output_dir: None,
            seed: 0,
        }),
        "vanderpol" => Ok(ExperimentConfig {
            system: "vanderpol".into(),
            mu: 1.0,
            kernel,
            centers: PointsConfig::Grid {
                bounds: vec![(-2.0, 2.0), (-2.0, 2.0)],
                counts: vec![10, 10],
            },
            collocation: CollocationConfig::SameAsCenters,
            riccati_q: Some(vec![vec![2.0, 0.0], vec![0.0, 2.0]]),
            hessian_relaxation: 0.5,
            solver: SolverSettings::default(),
            simulation: Some(SimulationConfig {
                horizon: 20.0,
                step: StepControl::Fixed { h: 1e-3 },
                initial_conditions: IcSet::Circle {
                    radius: 1.5,
                    count: 8,
                },
                output_samples: 1000,
            }),
            output_dir: None,
            seed: 0,
        }),
        other => Err(Error::input(format!(
            "unknown experiment '{other}' (expected poly1d, radial2d or vanderpol)"
        ))),
    }
}

/// Acceptance gates for one experiment. Time gates are soft: reported only.
pub struct Gates {
    pub hessian_fro_tol: f64,
    pub max_final_norm_tol: f64,
    pub soft_time_limit_s: f64,
}

pub fn gates(name: &str) -> Result<Gates> {
    match name {
        "poly1d" => Ok(Gates {
            hessian_fro_tol: 1e-4,
            max_final_norm_tol: 1e-4,
            soft_time_limit_s: 30.0,
        }),
        "radial2d" => Ok(Gates {
            hessian_fro_tol: 1.0,
            max_final_norm_tol: 1e-2,
            soft_time_limit_s: 120.0,
        }),
        "vanderpol" => Ok(Gates {
            hessian_fro_tol: 1.5,
            max_final_norm_tol: 1e-5,
            soft_time_limit_s: 120.0,
        }),
        other => Err(Error::input(format!("unknown experiment '{other}'"))),
    }
}

#[derive(Debug, Serialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub soft: bool,
}

/// Consolidated row mirroring the cross-experiment comparison table.
#[derive(Debug, Serialize)]
pub struct ReproduceSummary {
    pub experiment: String,
    pub dimension: usize,
    pub centers: usize,
    pub initial_conditions: usize,
    pub max_final_norm: f64,
    pub mean_final_norm: f64,
    pub hessian_residual_fro: f64,
    pub value_at_origin: f64,
    pub gradient_norm_at_origin: f64,
    pub lmi_relaxation: Option<f64>,
    pub solve_time_s: f64,
    pub gates: Vec<GateResult>,
    pub all_hard_gates_pass: bool,
}
