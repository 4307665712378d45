//! Control-affine systems with cost structure, their linearizations at the
//! origin, and the built-in benchmark systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type StateFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type InputMapFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Known optimal solution attached to a benchmark model.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub grad: StateFn,
    pub control: StateFn,
}

/// A control-affine system xdot = f(x) + g(x) u with running cost
/// q(x) + u' D u / 2 over an axis-aligned domain box.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub f: StateFn,
    pub g: InputMapFn,
    pub q: ScalarFn,
    pub d: DMatrix<f64>,
    pub domain: Vec<(f64, f64)>,
    /// Analytic Jacobian of f, used by `linearize` when present.
    pub jac_f: Option<JacobianFn>,
    /// Analytic Hessian of q, used by `linearize` when present.
    pub hess_q: Option<JacobianFn>,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("domain", &self.domain)
            .finish()
    }
}

impl SystemModel {
    /// Check the structural invariants: origin is an equilibrium, zero state
    /// cost at the origin, D symmetric positive definite, domain well formed.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::input("state and input dimensions must be positive"));
        }
        if self.domain.len() != self.n || self.domain.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::input("domain must be a nonempty box of dimension n"));
        }
        let zero = DVector::zeros(self.n);
        let f0 = (self.f)(&zero);
        if f0.norm() >= 1e-12 {
            return Err(Error::input(format!(
                "origin is not an equilibrium: |f(0)| = {:.3e}",
                f0.norm()
            )));
        }
        let q0 = (self.q)(&zero);
        if q0.abs() >= 1e-12 {
            return Err(Error::input(format!("q(0) must vanish, got {q0:.3e}")));
        }
        if self.d.nrows() != self.m || self.d.ncols() != self.m {
            return Err(Error::input("D must be m x m"));
        }
        if (&self.d - self.d.transpose()).norm() > 1e-12 * (1.0 + self.d.norm()) {
            return Err(Error::input("D must be symmetric"));
        }
        let eig = self.d.clone().symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::input("D must be positive definite"));
        }
        Ok(())
    }

    /// Sample-check positivity of q away from the origin. Returns the number
    /// of sampled points with q(x) <= 0. The manufactured benchmark costs
    /// violate this away from the origin, so this is a reported diagnostic
    /// rather than a constructor gate.
    pub fn count_nonpositive_cost_samples(&self, seed: u64, samples: usize) -> usize {
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut next = || {
            // xorshift64*, plenty for sampling test points
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut bad = 0;
        for _ in 0..samples {
            let x = DVector::from_iterator(
                self.n,
                self.domain.iter().map(|&(lo, hi)| lo + (hi - lo) * next()),
            );
            if x.norm() < 1e-6 {
                continue;
            }
            if (self.q)(&x) <= 0.0 {
                bad += 1;
            }
        }
        bad
    }
}

/// Linearization data at the origin: A = df/dx(0), B = g(0), Q = hess q(0).
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Linearize at the origin, preferring analytic derivatives when the model
/// carries them.
pub fn linearize(model: &SystemModel) -> Result<Linearization> {
    linearize_impl(model, true)
}

/// Finite-difference-only linearization, used to cross-validate the analytic
/// path on the built-ins.
pub fn linearize_fd(model: &SystemModel) -> Result<Linearization> {
    linearize_impl(model, false)
}

fn linearize_impl(model: &SystemModel, use_analytic: bool) -> Result<Linearization> {
    model.validate()?;
    let zero = DVector::zeros(model.n);
    let a = match (&model.jac_f, use_analytic) {
        (Some(jac), true) => jac(&zero),
        _ => fd_jacobian(&model.f, model.n, 1e-6),
    };
    let b = (model.g)(&zero);
    let q = match (&model.hess_q, use_analytic) {
        (Some(hess), true) => hess(&zero),
        _ => {
            let q = fd_hessian_richardson(&model.q, model.n, 1e-4);
            let asym = (&q - q.transpose()).norm();
            if asym > 1e-6 * (1.0 + q.norm()) {
                return Err(Error::numerical(format!(
                    "finite-difference Hessian of q is asymmetric by {asym:.3e}"
                )));
            }
            q
        }
    };
    let q = (&q + q.transpose()) * 0.5;
    let eig = q.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-8 {
        return Err(Error::numerical(format!(
            "Hessian of q at 0 is indefinite (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    Ok(Linearization { a, b, q })
}

fn fd_jacobian(f: &StateFn, n: usize, h: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = DVector::zeros(n);
        let mut xm = DVector::zeros(n);
        xp[j] = h;
        xm[j] = -h;
        a.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    a
}

fn fd_hessian(q: &ScalarFn, n: usize, h: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    let f = |p: &DVector<f64>| q(p);
    for i in 0..n {
        for j in 0..n {
            let mut pp = DVector::zeros(n);
            let mut pm = DVector::zeros(n);
            let mut mp = DVector::zeros(n);
            let mut mm = DVector::zeros(n);
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            out[(i, j)] = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
        }
    }
    out
}

/// Central-difference Hessian with one Richardson refinement step,
/// cancelling the O(h^2) error term.
fn fd_hessian_richardson(q: &ScalarFn, n: usize, h: f64) -> DMatrix<f64> {
    let coarse = fd_hessian(q, n, h);
    let fine = fd_hessian(q, n, h / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// 1D benchmark: xdot = x + x^3 + u with a manufactured optimal pair
/// V*(x) = x^2 + 0.25 x^4, q chosen so the HJB equality holds identically.
pub fn builtin_1d() -> SystemModel {
    let f: StateFn = Arc::new(|x| DVector::from_row_slice(&[x[0] + x[0].powi(3)]));
    let g: InputMapFn = Arc::new(|_| DMatrix::from_row_slice(1, 1, &[1.0]));
    let grad_v = |x: f64| 2.0 * x + x.powi(3);
    // q = (V*')^2 / 2 - V*' f, the manufactured-solution recipe.
    let q: ScalarFn = Arc::new(move |x| {
        let dv = grad_v(x[0]);
        0.5 * dv * dv - dv * (x[0] + x[0].powi(3))
    });
    SystemModel {
        name: "poly1d".into(),
        n: 1,
        m: 1,
        f,
        g,
        q,
        d: DMatrix::from_row_slice(1, 1, &[1.0]),
        domain: vec![(-1.5, 1.5)],
        jac_f: Some(Arc::new(|x: &DVector<f64>| {
            DMatrix::from_row_slice(1, 1, &[1.0 + 3.0 * x[0] * x[0]])
        })),
        // q(x) = -x^4 - x^6/2, so q'' = -12 x^2 - 15 x^4.
        hess_q: Some(Arc::new(|x: &DVector<f64>| {
            DMatrix::from_row_slice(1, 1, &[-12.0 * x[0].powi(2) - 15.0 * x[0].powi(4)])
        })),
        exact: Some(ExactSolution {
            value: Arc::new(|x| x[0] * x[0] + 0.25 * x[0].powi(4)),
            grad: Arc::new(move |x| DVector::from_row_slice(&[grad_v(x[0])])),
            control: Arc::new(move |x| DVector::from_row_slice(&[-grad_v(x[0])])),
        }),
    }
}

/// 2D radially symmetric benchmark: xdot = x (1 + |x|^2) + u with
/// V*(x) = |x|^2 + 0.25 |x|^4 and u*(x) = -2x (1 + 0.5 |x|^2).
pub fn builtin_2d() -> SystemModel {
    let f: StateFn = Arc::new(|x| {
        let s = x.norm_squared();
        x * (1.0 + s)
    });
    let g: InputMapFn = Arc::new(|_| DMatrix::identity(2, 2));
    // Same recipe as the 1D case with g = I, D = I:
    // q = |grad V*|^2 / 2 - grad V*' f.
    let q: ScalarFn = Arc::new(|x| {
        let s = x.norm_squared();
        let grad = x * (2.0 * (1.0 + 0.5 * s));
        0.5 * grad.norm_squared() - grad.dot(&(x * (1.0 + s)))
    });
    SystemModel {
        name: "radial2d".into(),
        n: 2,
        m: 2,
        f,
        g,
        q,
        d: DMatrix::identity(2, 2),
        domain: vec![(-1.5, 1.5), (-1.5, 1.5)],
        jac_f: Some(Arc::new(|x: &DVector<f64>| {
            let s = x.norm_squared();
            DMatrix::identity(2, 2) * (1.0 + s) + x * x.transpose() * 2.0
        })),
        // q(x) = -s^2 - s^3/2 with s = |x|^2.
        hess_q: Some(Arc::new(|x: &DVector<f64>| {
            let s = x.norm_squared();
            let dq = -2.0 * s - 1.5 * s * s;
            let d2q = -2.0 - 3.0 * s;
            DMatrix::identity(2, 2) * (2.0 * dq) + x * x.transpose() * (4.0 * d2q)
        })),
        exact: Some(ExactSolution {
            value: Arc::new(|x| {
                let s = x.norm_squared();
                s + 0.25 * s * s
            }),
            grad: Arc::new(|x| x * (2.0 * (1.0 + 0.5 * x.norm_squared()))),
            control: Arc::new(|x| x * (-2.0 * (1.0 + 0.5 * x.norm_squared()))),
        }),
    }
}

/// Van der Pol oscillator with control on the second state and quadratic
/// cost x' (2 I) x + u^2 mapped onto the framework fields.
pub fn builtin_vdp(mu: f64) -> Result<SystemModel> {
    if !(mu > 0.0) {
        return Err(Error::input(format!("Van der Pol requires mu > 0, got {mu}")));
    }
    let f: StateFn = Arc::new(move |x| {
        DVector::from_row_slice(&[x[1], -x[0] + mu * (1.0 - x[0] * x[0]) * x[1]])
    });
    let g: InputMapFn = Arc::new(|_| DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    let q: ScalarFn = Arc::new(|x| 2.0 * x.norm_squared());
    Ok(SystemModel {
        name: "vanderpol".into(),
        n: 2,
        m: 1,
        f,
        g,
        q,
        d: DMatrix::from_row_slice(1, 1, &[1.0]),
        domain: vec![(-2.0, 2.0), (-2.0, 2.0)],
        jac_f: Some(Arc::new(move |x: &DVector<f64>| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    0.0,
                    1.0,
                    -1.0 - 2.0 * mu * x[0] * x[1],
                    mu * (1.0 - x[0] * x[0]),
                ],
            )
        })),
        hess_q: Some(Arc::new(|_: &DVector<f64>| DMatrix::identity(2, 2) * 4.0)),
        exact: None,
    })
}

/// Uncontrolled stable scalar system xdot = -x with q = x^2, used to
/// exercise the Lyapunov reduction (g = 0).
pub fn builtin_stable_1d() -> SystemModel {
    SystemModel {
        name: "stable1d".into(),
        n: 1,
        m: 1,
        f: Arc::new(|x: &DVector<f64>| -x.clone()),
        g: Arc::new(|_: &DVector<f64>| DMatrix::zeros(1, 1)),
        q: Arc::new(|x: &DVector<f64>| x[0] * x[0]),
        d: DMatrix::from_row_slice(1, 1, &[1.0]),
        domain: vec![(-1.0, 1.0)],
        jac_f: Some(Arc::new(|_: &DVector<f64>| {
            DMatrix::from_row_slice(1, 1, &[-1.0])
        })),
        hess_q: Some(Arc::new(|_: &DVector<f64>| {
            DMatrix::from_row_slice(1, 1, &[2.0])
        })),
        // Orbital-derivative equation -x V' + x^2 = 0 gives V = x^2 / 2.
        exact: Some(ExactSolution {
            value: Arc::new(|x| 0.5 * x[0] * x[0]),
            grad: Arc::new(|x| x.clone()),
            control: Arc::new(|_| DVector::zeros(1)),
        }),
    }
}

/// Build a built-in model by config name.
pub fn builtin_by_name(name: &str, mu: f64) -> Result<SystemModel> {
    match name {
        "poly1d" => Ok(builtin_1d()),
        "radial2d" => Ok(builtin_2d()),
        "stable1d" => Ok(builtin_stable_1d()),
        "vanderpol" => builtin_vdp(mu),
        other => Err(Error::input(format!(
            "unknown system '{other}' (expected poly1d, radial2d or vanderpol)"
        ))),
    }
}

/// The HJB equality residual of a candidate value-function gradient at x.
/// Zero everywhere iff (V, u = -D^{-1} g' grad V) solves the HJB equation.
pub fn hjb_equality_residual(model: &SystemModel, grad_v: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let f = (model.f)(x);
    let g = (model.g)(x);
    let d_inv_gt_grad = model
        .d
        .clone()
        .cholesky()
        .expect("D is positive definite")
        .solve(&(g.transpose() * grad_v));
    grad_v.dot(&f) - 0.5 * (g.transpose() * grad_v).dot(&d_inv_gt_grad) + (model.q)(x)
}
