//! Self-contained numerical kernels.
//!
//! * [`tridiag`]: symmetric tridiagonal eigensolver (implicit QL, Sturm bisection,
//!   inverse iteration)
//! * [`ode`]: explicit Runge-Kutta integrators with uniform dense output
//! * [`quad`]: tanh-sinh quadrature for integrands with essential endpoint decay
//! * [`fit`]: least-squares line fits used for exponent extraction
//! * [`jacobi`]: dense symmetric eigensolver for small Gramians

pub mod fit;
pub mod jacobi;
pub mod ode;
pub mod quad;
pub mod tridiag;

pub use fit::{fit_loglinear, FitResult};
pub use jacobi::{jacobi_eigen, SymMatrix};
pub use ode::{integrate_ode, rk4_step, OdeMethod, Trajectory};
pub use quad::{adaptive_quad, adaptive_quad_with, QuadratureResult};
pub use tridiag::{eigen_tridiag, eigenvalues_tridiag, EigenPair, TridiagonalSymmetric};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigensolver did not converge for eigenvalue index {index}")]
    EigenNoConvergence { index: usize },
    #[error("non-finite state at s = {s}")]
    NonFiniteState { s: f64 },
    #[error("ODE step budget exhausted at s = {s}")]
    StepBudget { s: f64 },
    #[error("quadrature did not reach tolerance {tol:e} (best {best:?})")]
    QuadratureNotConverged { tol: f64, best: QuadratureResult },
    #[error("degenerate abscissae: zero variance")]
    DegenerateFit,
}

/// Tolerances shared by the kernels; every field can be overridden from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub eigen_residual: f64,
    pub ode_step: f64,
    pub quad_tol: f64,
    pub conservation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_residual: 1e-10,
            ode_step: 1e-3,
            quad_tol: 1e-10,
            conservation: 1e-8,
        }
    }
}
