//! Assembly and solution of the collocation semidefinite program, and
//! extraction of the synthesized value function.
//!
//! The decision variable is the kernel coefficient vector p. The program
//! minimizes |p|^2 subject to the three equilibrium constraints (value,
//! gradient and Hessian at the origin) and one (1+m) x (1+m) PSD block per
//! collocation point. With a positive Hessian relaxation the Hessian rows
//! become two-sided inequalities instead of equalities.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::{feature_rows, point_in_box, CenterSet, FeatureRows, KernelSpec, PointSetDescriptor};
use crate::system::{InputMapFn, SystemModel};

/// Points at which the LMI is enforced.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    points: Vec<DVector<f64>>,
    descriptor: PointSetDescriptor,
}

impl CollocationGrid {
    /// The default of all three benchmark experiments: collocation points
    /// coincide with the kernel centers.
    pub fn same_as_centers(centers: &CenterSet) -> Self {
        CollocationGrid {
            points: centers.points().to_vec(),
            descriptor: centers.descriptor().clone(),
        }
    }

    pub fn grid(bounds: &[(f64, f64)], per_axis: &[usize]) -> Result<Self> {
        let set = CenterSet::grid(bounds, per_axis)?;
        Ok(CollocationGrid {
            points: set.points().to_vec(),
            descriptor: set.descriptor().clone(),
        })
    }

    pub fn from_points(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("collocation grid must be nonempty"));
        }
        Ok(CollocationGrid {
            points,
            descriptor: PointSetDescriptor::Explicit,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn descriptor(&self) -> &PointSetDescriptor {
        &self.descriptor
    }
}

/// Precomputed kernel/dynamics data for one collocation point.
#[derive(Debug, Clone)]
pub struct PointData {
    /// grad_x kappa(x_j, x_i)' f(x_j) for each center i.
    pub nabla_kf: DVector<f64>,
    /// Row i is grad_x kappa(x_j, x_i)' g(x_j); shape M x m.
    pub nabla_kg: DMatrix<f64>,
    pub q: f64,
}

/// The assembled synthesis problem, immutable after `assemble`.
pub struct SynthesisProblem {
    pub kernel: KernelSpec,
    pub centers: CenterSet,
    pub grid: CollocationGrid,
    pub p_target: DMatrix<f64>,
    pub eps_h: f64,
    pub d: DMatrix<f64>,
    pub g: InputMapFn,
    pub per_point: Vec<PointData>,
    pub origin: FeatureRows,
    /// Set when M < number of scalar equality rows.
    pub feasibility_warning: Option<String>,
}

/// Number of scalar equality rows when eps_h = 0: value + gradient + upper
/// triangle of the Hessian.
pub fn equality_row_count(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

/// Precompute everything the conic reduction needs.
pub fn assemble(
    model: &SystemModel,
    kernel: &KernelSpec,
    centers: &CenterSet,
    grid: &CollocationGrid,
    p_target: &DMatrix<f64>,
    eps_h: f64,
) -> Result<SynthesisProblem> {
    kernel.validate()?;
    centers.validate()?;
    model.validate()?;
    if kernel.dim != model.n {
        return Err(Error::input("kernel and model dimensions disagree"));
    }
    if centers.dim() != model.n {
        return Err(Error::input("centers and model dimensions disagree"));
    }
    if p_target.nrows() != model.n || p_target.ncols() != model.n {
        return Err(Error::input("Hessian target must be n x n"));
    }
    if eps_h < 0.0 {
        return Err(Error::input("Hessian relaxation must be >= 0"));
    }
    if !centers.inside(&model.domain) {
        return Err(Error::input("all kernel centers must lie inside the domain box"));
    }
    if grid.points().iter().any(|x| !point_in_box(x, &model.domain)) {
        return Err(Error::input("all collocation points must lie inside the domain box"));
    }

    let mut per_point = Vec::with_capacity(grid.len());
    for x in grid.points() {
        let rows = feature_rows(kernel, centers, x)?;
        let f = (model.f)(x);
        let g = (model.g)(x);
        let nabla_kf = rows.grad_cols.transpose() * &f;
        let nabla_kg = rows.grad_cols.transpose() * &g;
        per_point.push(PointData {
            nabla_kf,
            nabla_kg,
            q: (model.q)(x),
        });
    }
    let origin = feature_rows(kernel, centers, &DVector::zeros(model.n))?;

    let rows = equality_row_count(model.n);
    let feasibility_warning = if eps_h == 0.0 && centers.len() < rows {
        Some(format!(
            "M = {} centers but {} equality rows; the SDP is generically infeasible",
            centers.len(),
            rows
        ))
    } else {
        None
    };

    Ok(SynthesisProblem {
        kernel: kernel.clone(),
        centers: centers.clone(),
        grid: grid.clone(),
        p_target: p_target.clone(),
        eps_h,
        d: model.d.clone(),
        g: model.g.clone(),
        per_point,
        origin,
        feasibility_warning,
    })
}

/// The LMI block at collocation point j evaluated at coefficients p:
/// [[2(p' nabla_k f + q), p' nabla_k g], [(nabla_k g)' p, D]].
pub fn lmi_block(problem: &SynthesisProblem, j: usize, p: &DVector<f64>) -> DMatrix<f64> {
    let data = &problem.per_point[j];
    let m = problem.d.nrows();
    let mut block = DMatrix::zeros(1 + m, 1 + m);
    block[(0, 0)] = 2.0 * (p.dot(&data.nabla_kf) + data.q);
    let off = data.nabla_kg.transpose() * p;
    for k in 0..m {
        block[(0, 1 + k)] = off[k];
        block[(1 + k, 0)] = off[k];
    }
    block.view_mut((1, 1), (m, m)).copy_from(&problem.d);
    block
}

/// One PSD block of the standard-form program: constant + sum_i p_i coeffs[i]
/// must be positive semidefinite. Coefficient matrices are symmetric by
/// construction.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub size: usize,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

/// Standard-form reduction of the synthesis problem: minimize |p|^2 subject
/// to linear equalities, linear inequalities (a'p <= b) and PSD blocks.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub equalities: Vec<(DVector<f64>, f64)>,
    pub inequalities: Vec<(DVector<f64>, f64)>,
    pub psd_blocks: Vec<PsdBlock>,
    /// Indices (into the pre-drop equality list) of rows removed as linearly
    /// dependent.
    pub dropped_equalities: Vec<usize>,
    pub feasibility_warning: Option<String>,
}

/// Reduce the assembled problem to standard conic form.
pub fn to_conic(problem: &SynthesisProblem) -> ConicProgram {
    let m_centers = problem.centers.len();
    let n = problem.kernel.dim;
    let m_inputs = problem.d.nrows();

    let mut raw_eq: Vec<(DVector<f64>, f64)> = Vec::new();
    // Value at the origin: k0' p = 0.
    raw_eq.push((problem.origin.k_row.clone(), 0.0));
    // Gradient at the origin: row l of G0 times p = 0.
    for l in 0..n {
        raw_eq.push((problem.origin.grad_cols.row(l).transpose(), 0.0));
    }
    // Hessian rows over the upper triangle.
    let mut hessian_rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for l in 0..n {
        for k in l..n {
            let row = DVector::from_iterator(
                m_centers,
                problem.origin.hessians.iter().map(|h| h[(l, k)]),
            );
            hessian_rows.push((row, problem.p_target[(l, k)]));
        }
    }

    let mut inequalities = Vec::new();
    if problem.eps_h == 0.0 {
        raw_eq.extend(hessian_rows);
    } else {
        // Two-sided entrywise relaxation |h'p - P_lk| <= eps.
        for (row, rhs) in hessian_rows {
            inequalities.push((row.clone(), rhs + problem.eps_h));
            inequalities.push((-row, problem.eps_h - rhs));
        }
    }

    let (equalities, dropped_equalities) = drop_dependent_rows(raw_eq);

    let mut psd_blocks = Vec::with_capacity(problem.per_point.len());
    for data in &problem.per_point {
        let size = 1 + m_inputs;
        let mut constant = DMatrix::zeros(size, size);
        constant[(0, 0)] = 2.0 * data.q;
        constant
            .view_mut((1, 1), (m_inputs, m_inputs))
            .copy_from(&problem.d);
        let mut coeffs = Vec::with_capacity(m_centers);
        for i in 0..m_centers {
            let mut e = DMatrix::zeros(size, size);
            e[(0, 0)] = 2.0 * data.nabla_kf[i];
            for k in 0..m_inputs {
                e[(0, 1 + k)] = data.nabla_kg[(i, k)];
                e[(1 + k, 0)] = data.nabla_kg[(i, k)];
            }
            coeffs.push(e);
        }
        psd_blocks.push(PsdBlock {
            size,
            constant,
            coeffs,
        });
    }

    ConicProgram {
        num_vars: m_centers,
        equalities,
        inequalities,
        psd_blocks,
        dropped_equalities,
        feasibility_warning: problem.feasibility_warning.clone(),
    }
}

/// Drop equality rows that are linearly dependent on earlier rows, detected
/// by Gram-Schmidt with threshold 1e-10 relative to the largest row norm.
fn drop_dependent_rows(
    rows: Vec<(DVector<f64>, f64)>,
) -> (Vec<(DVector<f64>, f64)>, Vec<usize>) {
    let max_norm = rows
        .iter()
        .map(|(a, _)| a.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let threshold = 1e-10 * max_norm;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (idx, (a, b)) in rows.into_iter().enumerate() {
        let mut r = a.clone();
        for q in &basis {
            r -= q * q.dot(&r);
        }
        if r.norm() <= threshold {
            dropped.push(idx);
        } else {
            basis.push(r.clone() / r.norm());
            kept.push((a, b));
        }
    }
    (kept, dropped)
}

impl ConicProgram {
    /// Evaluate the affine map of block j at p. Equals `lmi_block` entrywise
    /// on the problem it was reduced from.
    pub fn block_value(&self, j: usize, p: &DVector<f64>) -> DMatrix<f64> {
        let block = &self.psd_blocks[j];
        let mut out = block.constant.clone();
        for (i, e) in block.coeffs.iter().enumerate() {
            out += e * p[i];
        }
        out
    }

    /// Solver-independent debug dump: equality rows as dense arrays, PSD
    /// coefficient matrices in upper-triangle-packed (column-major) form.
    pub fn debug_json(&self) -> serde_json::Value {
        let pack_upper = |m: &DMatrix<f64>| -> Vec<f64> {
            let s = m.nrows();
            let mut out = Vec::with_capacity(s * (s + 1) / 2);
            for j in 0..s {
                for i in 0..=j {
                    out.push(m[(i, j)]);
                }
            }
            out
        };
        json!({
            "num_vars": self.num_vars,
            "equalities": self.equalities.iter()
                .map(|(a, b)| json!({"a": a.as_slice(), "b": b}))
                .collect::<Vec<_>>(),
            "inequalities": self.inequalities.iter()
                .map(|(a, b)| json!({"a": a.as_slice(), "b": b}))
                .collect::<Vec<_>>(),
            "psd_blocks": self.psd_blocks.iter().map(|blk| json!({
                "size": blk.size,
                "constant_upper": pack_upper(&blk.constant),
                "coeffs_upper": blk.coeffs.iter().map(|c| pack_upper(c)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "dropped_equalities": self.dropped_equalities,
        })
    }
}

/// Conic backend settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Optional per-block diagonal preconditioner scaling the (1,1) entry
    /// by 1 / max(1, |2 q(x_j)|). Off by default.
    pub precondition: bool,
    /// Re-solve with a minimal uniform PSD-block slack when the strict
    /// program is certified primal infeasible. On by default.
    pub least_violation_fallback: bool,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-4,
            max_iterations: 50_000,
            precondition: false,
            least_violation_fallback: true,
            verbose: false,
        }
    }
}

/// Backend termination report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: String,
    pub iterations: u32,
    pub solve_time_s: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    /// Uniform eigenvalue shift applied to every PSD block when the strict
    /// program is infeasible and the least-violation fallback engaged; the
    /// returned coefficients satisfy M_j(p) + shift * I >= 0 only.
    pub lmi_relaxation: Option<f64>,
}

/// Objective of one backend call.
enum Objective {
    /// Minimize |p|^2 over the fixed program (optionally with every PSD
    /// block shifted by `psd_shift * I`).
    CoefficientNorm { psd_shift: f64 },
    /// Minimize the uniform slack t subject to M_j(p) + t I >= 0: the
    /// least-violation problem, always feasible for large t.
    Slack,
}

struct RawSolution {
    status: SolverStatus,
    x: Vec<f64>,
    iterations: u32,
    solve_time: f64,
    r_prim: f64,
    r_dual: f64,
    obj_val: f64,
}

fn clarabel_call(
    program: &ConicProgram,
    settings: &SolverSettings,
    objective: &Objective,
) -> RawSolution {
    let np = program.num_vars;
    // One extra variable (the slack) in least-violation mode.
    let slack_mode = matches!(objective, Objective::Slack);
    let nv = if slack_mode { np + 1 } else { np };
    let psd_shift = match objective {
        Objective::CoefficientNorm { psd_shift } => *psd_shift,
        Objective::Slack => 0.0,
    };
    let sqrt2 = 2.0_f64.sqrt();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    if !program.equalities.is_empty() {
        for (a, rhs) in &program.equalities {
            let mut row = vec![0.0; nv];
            row[..np].copy_from_slice(a.as_slice());
            rows.push(row);
            b.push(*rhs);
        }
        cones.push(SupportedConeT::ZeroConeT(program.equalities.len()));
    }
    if !program.inequalities.is_empty() {
        for (a, rhs) in &program.inequalities {
            let mut row = vec![0.0; nv];
            row[..np].copy_from_slice(a.as_slice());
            rows.push(row);
            b.push(*rhs);
        }
        cones.push(SupportedConeT::NonnegativeConeT(program.inequalities.len()));
    }
    for block in &program.psd_blocks {
        let s = block.size;
        // Optional congruence scaling diag(sc, I) M diag(sc, I).
        let sc = if settings.precondition {
            (1.0 / block.constant[(0, 0)].abs().max(1.0)).sqrt()
        } else {
            1.0
        };
        let scale_entry = |i: usize, j: usize, v: f64| {
            let mut v = v;
            if i == 0 {
                v *= sc;
            }
            if j == 0 {
                v *= sc;
            }
            v
        };
        // Scaled upper triangle, column-major, off-diagonals times sqrt(2):
        // s_vec = svec(constant) - sum_i p_i * (-svec(coeffs_i)) must land in
        // the PSD triangle cone, so A carries -svec(coeffs) and b svec(const).
        for j in 0..s {
            for i in 0..=j {
                let w = if i == j { 1.0 } else { sqrt2 };
                let mut row = vec![0.0; nv];
                for (v, e) in block.coeffs.iter().enumerate() {
                    row[v] = -w * scale_entry(i, j, e[(i, j)]);
                }
                if slack_mode && i == j {
                    // M_j(p) + t I: the slack multiplies the identity (the
                    // preconditioner scales the (0,0) entry twice).
                    row[np] = -w * if i == 0 { sc * sc } else { 1.0 };
                }
                rows.push(row);
                let mut rhs = block.constant[(i, j)];
                if i == j {
                    rhs += psd_shift;
                }
                b.push(w * scale_entry(i, j, rhs));
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(s));
    }

    let a_mat = CscMatrix::from(rows.iter());
    let (p_obj, q_obj) = if slack_mode {
        // Linear objective: minimize the slack variable.
        let mut q = vec![0.0; nv];
        q[np] = 1.0;
        (
            CscMatrix::new(nv, nv, vec![0; nv + 1], vec![], vec![]),
            q,
        )
    } else {
        // |p|^2 = (1/2) p' (2I) p.
        (
            CscMatrix::new(nv, nv, (0..=nv).collect(), (0..nv).collect(), vec![2.0; nv]),
            vec![0.0; nv],
        )
    };

    let mut clarabel_settings = DefaultSettings::default();
    clarabel_settings.verbose = settings.verbose;
    clarabel_settings.max_iter = settings.max_iterations;
    clarabel_settings.tol_feas = settings.tolerance;
    clarabel_settings.tol_gap_abs = settings.tolerance;
    clarabel_settings.tol_gap_rel = settings.tolerance;
    if slack_mode {
        // The pure-linear slack objective leaves the KKT system nearly
        // singular once many PSD blocks accumulate; a stronger static
        // regularization keeps the factorization stable. The slack value is
        // only used as a shift with headroom, so the small bias is harmless.
        clarabel_settings.static_regularization_constant = 1e-6;
    }

    let mut solver = DefaultSolver::new(&p_obj, &q_obj, &a_mat, &b, &cones, clarabel_settings);
    solver.solve();
    let sol = &solver.solution;
    RawSolution {
        status: sol.status,
        x: sol.x.clone(),
        iterations: sol.iterations,
        solve_time: sol.solve_time,
        r_prim: sol.r_prim,
        r_dual: sol.r_dual,
        obj_val: sol.obj_val,
    }
}

fn stats_from(raw: &RawSolution, lmi_relaxation: Option<f64>) -> SolverStats {
    SolverStats {
        status: format!("{:?}", raw.status),
        iterations: raw.iterations,
        solve_time_s: raw.solve_time,
        primal_residual: raw.r_prim,
        dual_residual: raw.r_dual,
        objective: raw.obj_val,
        lmi_relaxation,
    }
}

/// Solve the conic program with the interior-point backend.
///
/// When the strict program carries a primal infeasibility certificate (the
/// equilibrium constraints can be incompatible with the collocation LMIs;
/// see `ConicProgram::feasibility_warning` and the 1D benchmark), and
/// `settings.least_violation_fallback` is on, the program is re-solved in
/// two stages: first minimize the uniform slack t with M_j(p) + t I >= 0,
/// then minimize |p|^2 with every block shifted by the optimal slack. The
/// shift is reported in `SolverStats::lmi_relaxation` and the equality
/// constraints are never relaxed.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<(DVector<f64>, SolverStats)> {
    let np = program.num_vars;
    let strict = clarabel_call(program, settings, &Objective::CoefficientNorm { psd_shift: 0.0 });
    match strict.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let p = DVector::from_row_slice(&strict.x[..np]);
            Ok((p, stats_from(&strict, None)))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible
            if settings.least_violation_fallback && !program.psd_blocks.is_empty() =>
        {
            let slack = clarabel_call(program, settings, &Objective::Slack);
            if !matches!(
                slack.status,
                SolverStatus::Solved | SolverStatus::AlmostSolved
            ) {
                return Err(Error::synthesis(format!(
                    "SDP infeasible and the least-violation stage failed (status {:?})",
                    slack.status
                )));
            }
            let t_star = slack.x[np];
            if t_star <= 0.0 {
                return Err(Error::synthesis(
                    "backend reported infeasibility but the least-violation slack is nonpositive",
                ));
            }
            // Small multiplicative headroom so the shifted program has an
            // interior point.
            // 10% multiplicative headroom: at the exact minimax slack the
            // feasible set collapses to a single point whose global behavior
            // is uncontrolled; a modest interior lets the minimum-norm
            // objective pick a better-conditioned solution.
            let shift = t_star * 1.1 + 1e-9;
            let relaxed =
                clarabel_call(program, settings, &Objective::CoefficientNorm { psd_shift: shift });
            match relaxed.status {
                SolverStatus::Solved | SolverStatus::AlmostSolved => {
                    let p = DVector::from_row_slice(&relaxed.x[..np]);
                    Ok((p, stats_from(&relaxed, Some(shift))))
                }
                _ => Err(Error::synthesis(format!(
                    "least-violation resolve failed: status {:?}",
                    relaxed.status
                ))),
            }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            let mut msg = format!("SDP infeasible (status {:?})", strict.status);
            if let Some(w) = &program.feasibility_warning {
                msg.push_str(&format!("; {w}"));
            }
            Err(Error::synthesis(msg))
        }
        _ => Err(Error::synthesis(format!(
            "backend did not converge: status {:?}, primal residual {:.3e}, dual residual {:.3e}",
            strict.status, strict.r_prim, strict.r_dual
        ))),
    }
}

/// Kernel expansion of the synthesized value function, with its feedback law.
#[derive(Clone)]
pub struct ValueFunction {
    pub p: DVector<f64>,
    pub kernel: KernelSpec,
    pub centers: CenterSet,
    pub d: DMatrix<f64>,
    pub g: InputMapFn,
}

impl ValueFunction {
    pub fn new(
        p: DVector<f64>,
        kernel: KernelSpec,
        centers: CenterSet,
        d: DMatrix<f64>,
        g: InputMapFn,
    ) -> Result<Self> {
        if p.len() != centers.len() {
            return Err(Error::input("coefficient count must match center count"));
        }
        Ok(ValueFunction {
            p,
            kernel,
            centers,
            d,
            g,
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.centers
            .points()
            .iter()
            .zip(self.p.iter())
            .map(|(c, &pi)| pi * self.kernel.eval(x, c).expect("dimensions checked"))
            .sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.kernel.dim);
        for (c, &pi) in self.centers.points().iter().zip(self.p.iter()) {
            g += self.kernel.grad_x(x, c).expect("dimensions checked") * pi;
        }
        g
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.kernel.dim;
        let mut h = DMatrix::zeros(n, n);
        for (c, &pi) in self.centers.points().iter().zip(self.p.iter()) {
            h += self.kernel.hess_x(x, c).expect("dimensions checked") * pi;
        }
        h
    }

    /// Feedback u(x) = -D^{-1} g(x)' grad V(x).
    pub fn feedback(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = (self.g)(x);
        let rhs = g.transpose() * self.gradient(x);
        -self
            .d
            .clone()
            .cholesky()
            .expect("D is positive definite")
            .solve(&rhs)
    }
}

/// Wrap the optimal coefficients, enforcing the equilibrium invariants.
pub fn extract(p: &DVector<f64>, problem: &SynthesisProblem) -> Result<ValueFunction> {
    let vf = ValueFunction::new(
        p.clone(),
        problem.kernel.clone(),
        problem.centers.clone(),
        problem.d.clone(),
        problem.g.clone(),
    )?;
    let n = problem.kernel.dim;
    let zero = DVector::zeros(n);
    let v0 = vf.value(&zero).abs();
    if v0 >= 1e-6 {
        return Err(Error::synthesis(format!(
            "origin value constraint violated: |V(0)| = {v0:.3e}"
        )));
    }
    let g0 = vf.gradient(&zero).norm();
    if g0 >= 1e-6 {
        return Err(Error::synthesis(format!(
            "origin gradient constraint violated: |grad V(0)| = {g0:.3e}"
        )));
    }
    let h_err = (vf.hessian(&zero) - &problem.p_target).norm();
    // Entrywise relaxation eps admits a Frobenius mismatch up to n * eps.
    let h_budget = problem.eps_h * n as f64 + 1e-4;
    if h_err > h_budget {
        return Err(Error::synthesis(format!(
            "Hessian constraint violated: |hess V(0) - P|_F = {h_err:.3e} > {h_budget:.3e}"
        )));
    }
    Ok(vf)
}
