//! Verification of a synthesized value function: equilibrium residuals,
//! pointwise HJB residuals and LMI margins, suboptimality bounds, comparison
//! against exact solutions, and the center-count convergence study.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{CenterSet, KernelSpec};
use crate::simulate::SimulationResult;
use crate::synthesis::{
    assemble, extract, solve, to_conic, CollocationGrid, SolverSettings, ValueFunction,
};
use crate::system::{ExactSolution, SystemModel};

/// Residuals of the three equilibrium constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResiduals {
    pub value: f64,
    pub gradient: f64,
    pub hessian_fro: f64,
}

/// Pointwise HJB residual statistics over an evaluation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualStats {
    pub min: f64,
    pub max: f64,
    /// eps-hat := max(0, -min R).
    pub eps_hat: f64,
}

/// LMI margins: collocation points are certified by the SDP, off-grid
/// points are reported but not gated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiStats {
    pub collocation_min_eig: Option<f64>,
    pub grid_min_eig: f64,
}

/// Errors against a known exact solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonStats {
    pub max_value_error: f64,
    pub mean_value_error: f64,
    pub max_control_error: f64,
    pub mean_control_error: f64,
    /// Whether V-hat >= V* held on all sampled boundary points.
    pub boundary_dominates: Option<bool>,
}

/// Per-initial-condition suboptimality bound eps-hat * settling time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuboptimalityBound {
    pub initial_condition: Vec<f64>,
    /// First time |x(t)| <= 1e-3, or the horizon if never reached.
    pub settling_time: f64,
    pub bound: f64,
    /// J(x0; u-hat) - V*(x0) when the exact value is known.
    pub cost_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityFit {
    pub alpha: f64,
    pub beta: f64,
}

/// The full verification report for one synthesized controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub system: String,
    pub equilibrium: EquilibriumResiduals,
    pub residual: ResidualStats,
    pub lmi: LmiStats,
    pub comparison: Option<ComparisonStats>,
    pub suboptimality: Vec<SuboptimalityBound>,
    pub stability: Option<StabilityFit>,
}

impl VerificationReport {
    /// Human-readable summary mirroring the report fields.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("verification report: {}\n", self.system));
        out.push_str(&format!(
            "  equilibrium: |V(0)| = {:.3e}, |grad V(0)| = {:.3e}, |hess V(0) - P|_F = {:.3e}\n",
            self.equilibrium.value, self.equilibrium.gradient, self.equilibrium.hessian_fro
        ));
        out.push_str(&format!(
            "  residual: min = {:.3e}, max = {:.3e}, eps-hat = {:.3e}\n",
            self.residual.min, self.residual.max, self.residual.eps_hat
        ));
        if let Some(c) = self.lmi.collocation_min_eig {
            out.push_str(&format!("  lmi min-eig at collocation points: {c:.3e}\n"));
        }
        out.push_str(&format!(
            "  lmi min-eig over evaluation grid: {:.3e}\n",
            self.lmi.grid_min_eig
        ));
        if let Some(cmp) = &self.comparison {
            out.push_str(&format!(
                "  vs exact: max |V - V*| = {:.3e} (mean {:.3e}), max control error = {:.3e} (mean {:.3e})\n",
                cmp.max_value_error, cmp.mean_value_error, cmp.max_control_error, cmp.mean_control_error
            ));
        }
        if let Some(s) = &self.stability {
            out.push_str(&format!(
                "  decay fit: alpha = {:.3}, beta = {:.3}\n",
                s.alpha, s.beta
            ));
        }
        for b in &self.suboptimality {
            out.push_str(&format!(
                "  x0 = {:?}: settling time {:.3}, bound {:.3e}\n",
                b.initial_condition, b.settling_time, b.bound
            ));
        }
        out
    }
}

/// HJB residual R(x) = grad V' f - (1/2) grad V' g D^{-1} g' grad V + q.
pub fn hjb_residual(vf: &ValueFunction, model: &SystemModel, x: &DVector<f64>) -> f64 {
    hjb_residual_from_grad(model, &vf.gradient(x), x)
}

/// Same residual evaluated from an externally supplied gradient (used to
/// check exact solutions that are not kernel expansions).
pub fn hjb_residual_from_grad(
    model: &SystemModel,
    grad_v: &DVector<f64>,
    x: &DVector<f64>,
) -> f64 {
    let f = (model.f)(x);
    let g = (model.g)(x);
    let a = g.transpose() * grad_v;
    let d_inv_a = model
        .d
        .clone()
        .cholesky()
        .expect("D is positive definite")
        .solve(&a);
    grad_v.dot(&f) - 0.5 * a.dot(&d_inv_a) + (model.q)(x)
}

/// Minimum eigenvalue of the continuous-x LMI matrix
/// [[2(grad V' f + q), grad V' g], [g' grad V, D]].
pub fn lmi_margin(vf: &ValueFunction, model: &SystemModel, x: &DVector<f64>) -> f64 {
    let grad_v = vf.gradient(x);
    let f = (model.f)(x);
    let g = (model.g)(x);
    let m = model.m;
    let mut block = DMatrix::zeros(1 + m, 1 + m);
    block[(0, 0)] = 2.0 * (grad_v.dot(&f) + (model.q)(x));
    let off = g.transpose() * &grad_v;
    for k in 0..m {
        block[(0, 1 + k)] = off[k];
        block[(1 + k, 0)] = off[k];
    }
    block.view_mut((1, 1), (m, m)).copy_from(&model.d);
    block.symmetric_eigen().eigenvalues.min()
}

/// The three equilibrium residual magnitudes.
pub fn equilibrium_check(vf: &ValueFunction, p_target: &DMatrix<f64>) -> EquilibriumResiduals {
    let zero = DVector::zeros(vf.kernel.dim);
    EquilibriumResiduals {
        value: vf.value(&zero).abs(),
        gradient: vf.gradient(&zero).norm(),
        hessian_fro: (vf.hessian(&zero) - p_target).norm(),
    }
}

/// Residual statistics over a set of evaluation points.
pub fn residual_stats(
    vf: &ValueFunction,
    model: &SystemModel,
    points: &[DVector<f64>],
) -> ResidualStats {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for x in points {
        let r = hjb_residual(vf, model, x);
        min = min.min(r);
        max = max.max(r);
    }
    ResidualStats {
        min,
        max,
        eps_hat: (-min).max(0.0),
    }
}

/// Minimum LMI margin over a set of points.
pub fn min_lmi_margin(vf: &ValueFunction, model: &SystemModel, points: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .map(|x| lmi_margin(vf, model, x))
        .fold(f64::INFINITY, f64::min)
}

/// Per-initial-condition bound eps-hat * settling time, plus the empirical
/// cost gap against V* when available.
pub fn suboptimality_estimate(
    model: &SystemModel,
    batch: &SimulationResult,
    eps_hat: f64,
) -> Vec<SuboptimalityBound> {
    batch
        .trajectories
        .iter()
        .map(|traj| {
            let horizon = *traj.times.last().unwrap_or(&0.0);
            let settling_time = traj
                .times
                .iter()
                .zip(&traj.states)
                .find(|(_, x)| x.norm() <= 1e-3)
                .map(|(t, _)| *t)
                .unwrap_or(horizon);
            let cost_gap = model.exact.as_ref().map(|exact| {
                let j = crate::simulate::cost_of_trajectory(model, traj);
                j - (exact.value)(&traj.initial_condition)
            });
            SuboptimalityBound {
                initial_condition: traj.initial_condition.iter().copied().collect(),
                settling_time,
                bound: eps_hat * settling_time,
                cost_gap,
            }
        })
        .collect()
}

/// Error statistics against the model's exact solution over a point set.
/// Returns None when the model carries no exact solution. V is shifted by
/// V(0) before comparison.
pub fn compare_exact(
    vf: &ValueFunction,
    model: &SystemModel,
    points: &[DVector<f64>],
) -> Option<ComparisonStats> {
    let exact: &ExactSolution = model.exact.as_ref()?;
    let v0 = vf.value(&DVector::zeros(model.n));
    let mut max_v = 0.0_f64;
    let mut sum_v = 0.0;
    let mut max_u = 0.0_f64;
    let mut sum_u = 0.0;
    for x in points {
        let ev = (vf.value(x) - v0 - (exact.value)(x)).abs();
        let eu = (vf.feedback(x) - (exact.control)(x)).norm();
        max_v = max_v.max(ev);
        sum_v += ev;
        max_u = max_u.max(eu);
        sum_u += eu;
    }
    let count = points.len().max(1) as f64;
    let boundary_dominates = boundary_samples(&model.domain, 16).map(|samples| {
        samples
            .iter()
            .all(|x| vf.value(x) - v0 >= (exact.value)(x) - 1e-9)
    });
    Some(ComparisonStats {
        max_value_error: max_v,
        mean_value_error: sum_v / count,
        max_control_error: max_u,
        mean_control_error: sum_u / count,
        boundary_dominates,
    })
}

/// Sample points on the faces of the domain box (per-axis endpoints with the
/// remaining coordinates on a coarse grid). Returns None above 3 dimensions.
fn boundary_samples(domain: &[(f64, f64)], per_axis: usize) -> Option<Vec<DVector<f64>>> {
    let n = domain.len();
    if n > 3 {
        return None;
    }
    let mut out = Vec::new();
    for axis in 0..n {
        for &endpoint in &[domain[axis].0, domain[axis].1] {
            let others: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
            let mut idx = vec![0usize; others.len()];
            loop {
                let mut x = DVector::zeros(n);
                x[axis] = endpoint;
                for (slot, &a) in others.iter().enumerate() {
                    let (lo, hi) = domain[a];
                    let t = if per_axis == 1 {
                        0.5
                    } else {
                        idx[slot] as f64 / (per_axis - 1) as f64
                    };
                    x[a] = lo + t * (hi - lo);
                }
                out.push(x);
                // Odometer increment over the remaining axes.
                let mut carry = true;
                for slot in 0..idx.len() {
                    if carry {
                        idx[slot] += 1;
                        if idx[slot] == per_axis {
                            idx[slot] = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
        }
    }
    Some(out)
}

/// One row of the convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyPoint {
    pub centers: usize,
    pub gradient_l2_error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub points: Vec<StudyPoint>,
    /// Log-log slope of error against center count, over successful rows.
    pub slope: Option<f64>,
}

/// For each center count M, synthesize on an M-per-axis grid and measure the
/// root-mean-square gradient error against the exact solution on a fixed
/// quadrature grid.
pub fn convergence_study(
    model: &SystemModel,
    kernel: &KernelSpec,
    center_counts: &[usize],
    p_target: &DMatrix<f64>,
    eps_h: f64,
    quadrature: &[DVector<f64>],
    settings: &SolverSettings,
) -> Result<ConvergenceStudy> {
    let exact = model
        .exact
        .as_ref()
        .ok_or_else(|| Error::input("convergence study requires an exact solution"))?;
    let min_rows = crate::synthesis::equality_row_count(model.n);
    let mut points = Vec::with_capacity(center_counts.len());
    for &per_axis in center_counts {
        let total = per_axis.pow(model.n as u32);
        if eps_h == 0.0 && total < min_rows {
            points.push(StudyPoint {
                centers: total,
                gradient_l2_error: None,
                failure: Some(format!(
                    "{total} centers < {min_rows} equality rows: infeasible"
                )),
            });
            continue;
        }
        let run = || -> Result<f64> {
            let centers = CenterSet::grid(&model.domain, &vec![per_axis; model.n])?;
            let grid = CollocationGrid::same_as_centers(&centers);
            let problem = assemble(model, kernel, &centers, &grid, p_target, eps_h)?;
            let program = to_conic(&problem);
            let (p, _) = solve(&program, settings)?;
            let vf = extract(&p, &problem)?;
            let mut sum = 0.0;
            for x in quadrature {
                sum += (vf.gradient(x) - (exact.grad)(x)).norm_squared();
            }
            Ok((sum / quadrature.len().max(1) as f64).sqrt())
        };
        match run() {
            Ok(err) => points.push(StudyPoint {
                centers: total,
                gradient_l2_error: Some(err),
                failure: None,
            }),
            Err(e) => points.push(StudyPoint {
                centers: total,
                gradient_l2_error: None,
                failure: Some(format!("{e}")),
            }),
        }
    }
    let ok: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            p.gradient_l2_error
                .map(|e| ((p.centers as f64).ln(), e.max(1e-300).ln()))
        })
        .collect();
    let slope = if ok.len() >= 2 {
        let n = ok.len() as f64;
        let sx: f64 = ok.iter().map(|(x, _)| x).sum();
        let sy: f64 = ok.iter().map(|(_, y)| y).sum();
        let sxx: f64 = ok.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = ok.iter().map(|(x, y)| x * y).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    Ok(ConvergenceStudy { points, slope })
}

/// Report for the uncontrolled (Lyapunov) mode, where g = 0 and the HJB
/// inequality degenerates to the orbital-derivative inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Lyapunov-equation residual |A'P + P A + Q|_F.
    pub riccati_residual: f64,
    /// Hessian of the synthesized V at the origin (row-major).
    pub hessian_at_origin: Vec<f64>,
    /// Minimum of grad V' f + q over the evaluation grid.
    pub min_orbital_derivative_margin: f64,
}

/// Run the full pipeline for an uncontrolled model (g = 0) and check the
/// Lyapunov-mode reductions. Requires the linearization to be Hurwitz.
pub fn lyapunov_mode_check(
    model: &SystemModel,
    kernel: &KernelSpec,
    centers: &CenterSet,
    q_lyap: &DMatrix<f64>,
    eval_points: &[DVector<f64>],
    settings: &SolverSettings,
) -> Result<LyapunovReport> {
    // g must vanish identically (checked at a few sample points).
    for x in eval_points.iter().take(10) {
        if (model.g)(x).norm() > 0.0 {
            return Err(Error::input("Lyapunov mode requires g = 0"));
        }
    }
    let mut lin = crate::system::linearize(model)?;
    lin.q = q_lyap.clone();
    lin.b = DMatrix::zeros(model.n, model.m);
    let sol = crate::riccati::solve_are(&lin, &model.d)?;
    // With B = 0 the Riccati residual is the Lyapunov residual.
    let residual = (lin.a.transpose() * &sol.p + &sol.p * &lin.a + q_lyap).norm();
    if residual >= 1e-8 {
        return Err(Error::numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds 1e-8"
        )));
    }
    let grid = CollocationGrid::same_as_centers(centers);
    let problem = assemble(model, kernel, centers, &grid, &sol.p, 0.0)?;
    let program = to_conic(&problem);
    let (p, _) = solve(&program, settings)?;
    let vf = extract(&p, &problem)?;
    let min_margin = eval_points
        .iter()
        .map(|x| vf.gradient(x).dot(&(model.f)(x)) + (model.q)(x))
        .fold(f64::INFINITY, f64::min);
    Ok(LyapunovReport {
        riccati_residual: residual,
        hessian_at_origin: vf.hessian(&DVector::zeros(model.n)).iter().copied().collect(),
        min_orbital_derivative_margin: min_margin,
    })
}

/// Assemble the full report from precomputed pieces.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    vf: &ValueFunction,
    model: &SystemModel,
    p_target: &DMatrix<f64>,
    eval_points: &[DVector<f64>],
    collocation_points: Option<&[DVector<f64>]>,
    batch: Option<&SimulationResult>,
) -> VerificationReport {
    let residual = residual_stats(vf, model, eval_points);
    let lmi = LmiStats {
        collocation_min_eig: collocation_points.map(|pts| min_lmi_margin(vf, model, pts)),
        grid_min_eig: min_lmi_margin(vf, model, eval_points),
    };
    let suboptimality = batch
        .map(|b| suboptimality_estimate(model, b, residual.eps_hat))
        .unwrap_or_default();
    let stability = batch.map(|b| StabilityFit {
        alpha: b.decay_alpha,
        beta: b.decay_beta,
    });
    VerificationReport {
        system: model.name.clone(),
        equilibrium: equilibrium_check(vf, p_target),
        residual,
        lmi,
        comparison: compare_exact(vf, model, eval_points),
        suboptimality,
        stability,
    }
}

/// Uniform evaluation grid over a box, endpoint-inclusive.
pub fn evaluation_grid(bounds: &[(f64, f64)], per_axis: &[usize]) -> Result<Vec<DVector<f64>>> {
    Ok(CenterSet::grid(bounds, per_axis)?.points().to_vec())
}
