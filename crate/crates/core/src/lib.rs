//! Kernel-collocation synthesis of approximate optimal value functions and
//! stabilizing feedback laws for control-affine nonlinear systems.
//!
//! The pipeline: linearize the system at the origin, solve the algebraic
//! Riccati equation for the local curvature target, assemble a semidefinite
//! program whose variable is the coefficient vector of a kernel expansion of
//! the value function, solve it, and validate the result by closed-loop
//! simulation and pointwise residual/LMI checks.

// Force linkage of the system BLAS/LAPACK backend used by the conic solver.
extern crate openblas_src;

pub mod error;
pub mod kernel;
pub mod riccati;
pub mod simulate;
pub mod synthesis;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{feature_rows, CenterSet, KernelFamily, KernelSpec};
pub use riccati::{are_residual, scalar_closed_form, solve_are, RiccatiSolution};
pub use simulate::{IcSet, SimulationConfig, SimulationResult, StepControl, Trajectory};
pub use synthesis::{
    assemble, extract, solve, to_conic, CollocationGrid, ConicProgram, SolverSettings,
    SolverStats, SynthesisProblem, ValueFunction,
};
pub use system::{linearize, Linearization, SystemModel};
pub use verify::VerificationReport;
