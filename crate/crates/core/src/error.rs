use thiserror::Error;

/// Errors produced by the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: bad dimensions, out-of-range parameters,
    /// points outside the declared domain.
    #[error("input error: {0}")]
    Input(String),

    /// A numerical procedure lost too much accuracy to continue
    /// (e.g. a finite-difference Hessian that fails its symmetry check).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Synthesis failed: the Riccati equation has no stabilizing solution,
    /// the SDP is infeasible, or the extracted value function violates its
    /// equilibrium constraints.
    #[error("synthesis error: {0}")]
    Synthesis(String),

    /// A simulated trajectory blew up.
    #[error("blow-up at t = {time:.4} from x0 = {ic}: state norm {norm:.3e} exceeds 1e6")]
    BlowUp { ic: String, time: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn synthesis(msg: impl Into<String>) -> Self {
        Error::Synthesis(msg.into())
    }
}
