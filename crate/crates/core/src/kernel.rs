//! Kernel families with analytic value, gradient and Hessian evaluation,
//! plus batched feature matrices over center sets.
//!
//! Everything downstream (value function, gradient, Hessian, LMI blocks) is
//! linear in the expansion coefficients once these features are computed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// Isotropic polynomial kernel (c + x'y)^d.
    #[serde(rename = "polynomial")]
    PolynomialIso { degree: u32, offset: f64 },
    /// Gaussian kernel exp(-|x-y|^2 / (2 sigma^2)).
    #[serde(rename = "gaussian")]
    Gaussian { bandwidth: f64 },
}

/// A kernel family bound to a state dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    pub dim: usize,
}

impl KernelSpec {
    pub fn polynomial(dim: usize, degree: u32, offset: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::PolynomialIso { degree, offset },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(dim: usize, bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Gaussian { bandwidth },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::input("kernel dimension must be positive"));
        }
        match self.family {
            KernelFamily::PolynomialIso { degree, offset } => {
                // The Hessian equality constraint at the origin needs a
                // nonvanishing second derivative against nonzero centers.
                if degree < 2 {
                    return Err(Error::input(format!(
                        "polynomial kernel degree must be >= 2, got {degree}"
                    )));
                }
                if !(offset > 0.0) {
                    return Err(Error::input(format!(
                        "polynomial kernel offset must be > 0, got {offset}"
                    )));
                }
            }
            KernelFamily::Gaussian { bandwidth } => {
                if !(bandwidth > 0.0) {
                    return Err(Error::input(format!(
                        "gaussian kernel bandwidth must be > 0, got {bandwidth}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_dims(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::input(format!(
                "kernel expects points of dimension {}, got {} and {}",
                self.dim,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// kappa(x, y). Symmetric in its arguments.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dims(x, y)?;
        Ok(match self.family {
            KernelFamily::PolynomialIso { degree, offset } => {
                // Integer power by repeated multiplication: exact for
                // negative bases, no real-power domain issues.
                int_pow(offset + x.dot(y), degree)
            }
            KernelFamily::Gaussian { bandwidth } => {
                let d2 = (x - y).norm_squared();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
        })
    }

    /// Gradient of kappa with respect to the first argument.
    pub fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x, y)?;
        Ok(match self.family {
            KernelFamily::PolynomialIso { degree, offset } => {
                let base = offset + x.dot(y);
                y * (degree as f64 * int_pow(base, degree - 1))
            }
            KernelFamily::Gaussian { bandwidth } => {
                let s2 = bandwidth * bandwidth;
                let k = (-(x - y).norm_squared() / (2.0 * s2)).exp();
                (y - x) * (k / s2)
            }
        })
    }

    /// Hessian of kappa with respect to the first argument. The returned
    /// matrix is bitwise symmetric: only the upper triangle is computed and
    /// then mirrored.
    pub fn hess_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(x, y)?;
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        match self.family {
            KernelFamily::PolynomialIso { degree, offset } => {
                let base = offset + x.dot(y);
                let scale = degree as f64 * (degree - 1) as f64 * int_pow(base, degree - 2);
                for i in 0..n {
                    for j in i..n {
                        h[(i, j)] = scale * y[i] * y[j];
                    }
                }
            }
            KernelFamily::Gaussian { bandwidth } => {
                let s2 = bandwidth * bandwidth;
                let k = (-(x - y).norm_squared() / (2.0 * s2)).exp();
                for i in 0..n {
                    for j in i..n {
                        let outer = (x[i] - y[i]) * (x[j] - y[j]) / (s2 * s2);
                        let diag = if i == j { 1.0 / s2 } else { 0.0 };
                        h[(i, j)] = k * (outer - diag);
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        Ok(h)
    }
}

fn int_pow(base: f64, exp: u32) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// How a center or collocation point set was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSetDescriptor {
    /// Uniform grid with endpoints included (linspace semantics per axis).
    Grid {
        bounds: Vec<(f64, f64)>,
        per_axis: Vec<usize>,
    },
    Explicit,
}

/// Expansion nodes for the kernel representation of the value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    centers: Vec<DVector<f64>>,
    descriptor: PointSetDescriptor,
}

impl CenterSet {
    /// Uniform grid over an axis-aligned box, endpoints included.
    pub fn grid(bounds: &[(f64, f64)], per_axis: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != per_axis.len() {
            return Err(Error::input(
                "grid bounds and per-axis counts must be nonempty and of equal length",
            ));
        }
        for (&(lo, hi), &k) in bounds.iter().zip(per_axis) {
            if !(lo < hi) || k < 2 {
                return Err(Error::input(format!(
                    "grid axis needs lo < hi and at least 2 points, got [{lo}, {hi}] with {k}"
                )));
            }
        }
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .zip(per_axis)
            .map(|(&(lo, hi), &k)| {
                (0..k)
                    .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                    .collect()
            })
            .collect();
        let mut centers = Vec::with_capacity(per_axis.iter().product());
        let n = bounds.len();
        let total: usize = per_axis.iter().product();
        for mut idx in 0..total {
            let mut point = DVector::zeros(n);
            for ax in 0..n {
                point[ax] = axes[ax][idx % per_axis[ax]];
                idx /= per_axis[ax];
            }
            centers.push(point);
        }
        Ok(CenterSet {
            centers,
            descriptor: PointSetDescriptor::Grid {
                bounds: bounds.to_vec(),
                per_axis: per_axis.to_vec(),
            },
        })
    }

    /// Explicit list of centers. Centers must be pairwise distinct.
    pub fn from_points(points: Vec<DVector<f64>>) -> Result<Self> {
        let set = CenterSet {
            centers: points,
            descriptor: PointSetDescriptor::Explicit,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::input("center set must be nonempty"));
        }
        let n = self.centers[0].len();
        if self.centers.iter().any(|c| c.len() != n) {
            return Err(Error::input("all centers must share one dimension"));
        }
        for i in 0..self.centers.len() {
            for j in (i + 1)..self.centers.len() {
                if (&self.centers[i] - &self.centers[j]).norm() == 0.0 {
                    return Err(Error::input(format!(
                        "centers {i} and {j} coincide; centers must be pairwise distinct"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn descriptor(&self) -> &PointSetDescriptor {
        &self.descriptor
    }

    /// True if every center lies inside (or on the boundary of) the box.
    pub fn inside(&self, domain: &[(f64, f64)]) -> bool {
        self.centers.iter().all(|c| point_in_box(c, domain))
    }
}

pub(crate) fn point_in_box(x: &DVector<f64>, domain: &[(f64, f64)]) -> bool {
    x.len() == domain.len()
        && x.iter()
            .zip(domain)
            .all(|(&xi, &(lo, hi))| xi >= lo && xi <= hi)
}

/// Kernel features of a single evaluation point against a center set:
/// the value row, the gradient columns and the per-center Hessians.
pub struct FeatureRows {
    /// k_row[i] = kappa(x, x_i).
    pub k_row: DVector<f64>,
    /// Column i is grad_x kappa(x, x_i); shape n x M.
    pub grad_cols: DMatrix<f64>,
    /// hessians[i] = hess_x kappa(x, x_i).
    pub hessians: Vec<DMatrix<f64>>,
}

/// Evaluate all kernel features of `x` against `centers`.
pub fn feature_rows(spec: &KernelSpec, centers: &CenterSet, x: &DVector<f64>) -> Result<FeatureRows> {
    if centers.is_empty() {
        return Err(Error::input("feature_rows requires a nonempty center set"));
    }
    let m = centers.len();
    let n = spec.dim;
    let mut k_row = DVector::zeros(m);
    let mut grad_cols = DMatrix::zeros(n, m);
    let mut hessians = Vec::with_capacity(m);
    for (i, c) in centers.points().iter().enumerate() {
        k_row[i] = spec.eval(x, c)?;
        grad_cols.set_column(i, &spec.grad_x(x, c)?);
        hessians.push(spec.hess_x(x, c)?);
    }
    Ok(FeatureRows {
        k_row,
        grad_cols,
        hessians,
    })
}
