//! Continuous-time algebraic Riccati equation solver.
//!
//! Scalar systems use the closed form; everything else goes through the
//! stable invariant subspace of the 2n x 2n Hamiltonian matrix
//! [[A, -B D^{-1} B'], [-Q, -A']], computed with the determinant-scaled
//! matrix sign iteration. The subspace basis [X1; X2] gives P = X2 X1^{-1},
//! which is then symmetrized and recertified against the residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::Linearization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiccatiMethod {
    ScalarClosedForm,
    HamiltonianSubspace,
}

/// Certified solution of A'P + PA - P B D^{-1} B' P + Q = 0.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub residual_norm: f64,
    pub method: RiccatiMethod,
}

/// Positive root of the scalar Riccati equation 2AP - P^2 B^2 / D + Q = 0.
///
/// Requires B != 0; the B = 0 case is the Lyapunov equation and must be
/// routed there by the caller.
pub fn scalar_closed_form(a: f64, b: f64, d: f64, q: f64) -> f64 {
    debug_assert!(b != 0.0 && d > 0.0 && q >= 0.0);
    let ad_b2 = a * d / (b * b);
    ad_b2 + (ad_b2 * ad_b2 + q * d / (b * b)).sqrt()
}

/// Frobenius norm of the Riccati residual A'P + PA - P B D^{-1} B' P + Q.
pub fn are_residual(p: &DMatrix<f64>, lin: &Linearization, d: &DMatrix<f64>) -> f64 {
    let bdbt = b_dinv_bt(&lin.b, d);
    (lin.a.transpose() * p + p * &lin.a - p * bdbt * p + &lin.q).norm()
}

fn b_dinv_bt(b: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let chol = d.clone().cholesky().expect("D is positive definite");
    &b.clone() * chol.solve(&b.transpose())
}

/// Solve the continuous-time ARE for the given linearization and control
/// weight. Fails when the linearized system admits no stabilizing solution.
pub fn solve_are(lin: &Linearization, d: &DMatrix<f64>) -> Result<RiccatiSolution> {
    let n = lin.a.nrows();
    if lin.a.ncols() != n || lin.b.nrows() != n || lin.q.nrows() != n || lin.q.ncols() != n {
        return Err(Error::input("linearization dimensions are inconsistent"));
    }
    let m = lin.b.ncols();
    if d.nrows() != m || d.ncols() != m {
        return Err(Error::input("D must match the input dimension"));
    }
    if d.clone().cholesky().is_none() {
        return Err(Error::input("D must be positive definite"));
    }
    let q_min = lin.q.clone().symmetric_eigen().eigenvalues.min();
    if q_min < -1e-10 {
        return Err(Error::input(format!(
            "Q must be positive semidefinite (min eigenvalue {q_min:.3e})"
        )));
    }

    let (p, method) = if n == 1 && lin.b.norm() > 1e-14 {
        let p = scalar_closed_form(lin.a[(0, 0)], lin.b[(0, 0)], d[(0, 0)], lin.q[(0, 0)]);
        (
            DMatrix::from_row_slice(1, 1, &[p]),
            RiccatiMethod::ScalarClosedForm,
        )
    } else {
        (
            hamiltonian_subspace(lin, d)?,
            RiccatiMethod::HamiltonianSubspace,
        )
    };

    certify(p, lin, d, method)
}

fn certify(
    p: DMatrix<f64>,
    lin: &Linearization,
    d: &DMatrix<f64>,
    method: RiccatiMethod,
) -> Result<RiccatiSolution> {
    let p = (&p + p.transpose()) * 0.5;
    let eig = p.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::synthesis(format!(
            "Riccati solution is not positive definite (min eigenvalue {:.3e}); \
             the linearized system is not stabilizable/detectable",
            eig.eigenvalues.min()
        )));
    }
    let residual_norm = are_residual(&p, lin, d);
    if residual_norm >= 1e-8 * (1.0 + p.norm()) {
        return Err(Error::synthesis(format!(
            "Riccati residual {residual_norm:.3e} exceeds tolerance"
        )));
    }
    // Returned P must close the loop: all eigenvalues of A - B D^{-1} B' P
    // strictly in the left half plane.
    let closed = &lin.a - b_dinv_bt(&lin.b, d) * &p;
    let max_re = closed
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::synthesis(format!(
            "closed-loop matrix is not Hurwitz (max Re lambda = {max_re:.3e})"
        )));
    }
    Ok(RiccatiSolution {
        p,
        residual_norm,
        method,
    })
}

/// Stable invariant subspace of the Hamiltonian via the matrix sign
/// iteration Z <- (Z / gamma + gamma Z^{-1}) / 2 with determinant scaling.
fn hamiltonian_subspace(lin: &Linearization, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = lin.a.nrows();
    let bdbt = b_dinv_bt(&lin.b, d);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&lin.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&bdbt));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&lin.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-lin.a.transpose()));

    let mut z = h;
    let mut converged = false;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det: f64 = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::synthesis(
                "Hamiltonian matrix is singular; eigenvalues on the imaginary axis",
            ));
        }
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::synthesis("Hamiltonian sign iteration: inversion failed"))?;
        let gamma = det.abs().powf(1.0 / (2 * n) as f64);
        let next = (&z / gamma + z_inv * gamma) * 0.5;
        let delta = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if delta <= 1e-14 * scale.max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::synthesis("Hamiltonian sign iteration did not converge"));
    }

    // sign(H) acts as -I on the stable subspace, so (sign(H) + I)[I; P] = 0.
    // Stacking the block rows gives the overdetermined system
    // [[S12], [S22 + I]] P = -[[S11 + I], [S21]], solved in least squares.
    let s11 = z.view((0, 0), (n, n));
    let s12 = z.view((0, n), (n, n));
    let s21 = z.view((n, 0), (n, n));
    let s22 = z.view((n, n), (n, n));
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(s22 + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(s11 + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s21.clone_owned()));
    let svd = lhs.svd(true, true);
    let sv_min = svd.singular_values.min();
    if sv_min < 1e-8 {
        return Err(Error::synthesis(
            "stable invariant subspace is degenerate; system not stabilizable",
        ));
    }
    let p = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::synthesis(format!("failed to recover P from sign function: {e}")))?;
    Ok(p)
}
