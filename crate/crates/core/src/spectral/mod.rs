//! Eigenbasis of Grushin-type operators `L = −(∂²_{x₁} + V(x₁)∂²_{x₂})` and the
//! spectral calculus built on it.
//!
//! Two domains are supported:
//!
//! * the Dirichlet rectangle `[−1,1]×[0,1]` with `V = x₁^{2γ}` and modes
//!   `√2·v(x₁)·sin(nπx₂)`; after Fourier transform in `x₂` each `n` gives the
//!   one-dimensional operator `−f″ + (nπ)²x₁^{2γ}f` on `(−1,1)`;
//! * the torus `(ℝ/2ℤ)×(ℝ/ℤ)` with the analytic potential `V = sin(πx₁/2)^{2γ}`
//!   and real Fourier modes `1, √2cos(2πnx₂), √2sin(2πnx₂)`. Note the factor
//!   2π (not π) multiplying the Fourier index on the torus.
//!
//! The elliptic family is the rectangle with `γ = 0`, i.e. the Dirichlet Laplacian.

mod basis;
mod io;
mod subelliptic;
mod vector;

pub use basis::{build_basis, build_basis_for, one_dim_operator, x2_overlap, Mode, SpectralBasis, X2Mode};
pub(crate) use basis::trig_integrals;
pub use io::{read_basis, write_basis};
pub use subelliptic::{subelliptic_ratio, subelliptic_ratio_of, TorusTrial};
pub use vector::{GridSample, SpectralVector};

use crate::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid operator spec: {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("eigensolver failed for fourier index {n}, branch {branch}: {source}")]
    Eigen {
        n: i64,
        branch: usize,
        #[source]
        source: NumericsError,
    },
    #[error("spectral function not finite at mode index {index} (λ = {lambda})")]
    NonFiniteCalculus { index: usize, lambda: f64 },
    #[error("Gevrey weight overflow: θ·λ_max^α exceeds 700 with λ_max = {lambda_max}")]
    GevreyOverflow { lambda_max: f64 },
    #[error("operation undefined for the zero vector")]
    ZeroVector,
    #[error("coefficient vectors live on different bases")]
    BasisMismatch,
    #[error("coefficient count {got} does not match mode count {expected}")]
    Length { expected: usize, got: usize },
    #[error("basis file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    GrushinRectangle,
    GrushinTorus,
    Elliptic,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::GrushinRectangle => "grushin_rectangle",
            Family::GrushinTorus => "grushin_torus",
            Family::Elliptic => "elliptic",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "grushin_rectangle" => Some(Family::GrushinRectangle),
            "grushin_torus" => Some(Family::GrushinTorus),
            "elliptic" => Some(Family::Elliptic),
            _ => None,
        }
    }
}

/// A hypoelliptic operator instance together with its discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub family: Family,
    pub gamma: u32,
    /// Points of the uniform `x₁` grid on `[−1,1]`, endpoints included; `2^p + 1`.
    pub grid_n: usize,
    pub fourier_max: usize,
    pub branch_max: usize,
    /// Keep only modes with `λ ≤ cutoff`.
    pub lambda_cutoff: Option<f64>,
}

impl OperatorSpec {
    pub fn grushin(gamma: u32, grid_n: usize, fourier_max: usize, branch_max: usize) -> Self {
        OperatorSpec {
            family: Family::GrushinRectangle,
            gamma,
            grid_n,
            fourier_max,
            branch_max,
            lambda_cutoff: None,
        }
    }

    /// Hypoellipticity index `k = γ + 1`.
    pub fn k(&self) -> u32 {
        self.gamma + 1
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |field, reason: String| Err(SpectralError::InvalidSpec { field, reason });
        if self.grid_n < 129 || !(self.grid_n - 1).is_power_of_two() {
            return bad("grid_n", format!("must be 2^p + 1 and at least 129, got {}", self.grid_n));
        }
        if self.fourier_max < 1 {
            return bad("fourier_max", "must be at least 1".into());
        }
        if self.branch_max < 1 {
            return bad("branch_max", "must be at least 1".into());
        }
        // smallest 1D problem: odd torus modes on the coarse half grid
        let coarse_half = (self.grid_n - 1) / 4;
        if self.branch_max > coarse_half - 1 {
            return bad("branch_max", format!("must not exceed {}", coarse_half - 1));
        }
        if self.family == Family::Elliptic && self.gamma != 0 {
            return bad("gamma", "elliptic family requires gamma = 0".into());
        }
        if self.gamma > 16 {
            return bad("gamma", format!("unsupported gamma {}", self.gamma));
        }
        if let Some(c) = self.lambda_cutoff {
            if !(c > 0.0) || !c.is_finite() {
                return bad("lambda_cutoff", format!("must be positive and finite, got {c}"));
            }
        }
        Ok(())
    }

    /// Coefficient multiplying the potential for Fourier index `n`: `(nπ)²` on
    /// the rectangle, `(2πn)²` on the torus.
    pub fn fourier_weight(&self, n: i64) -> f64 {
        let freq = self.x2_frequency(n);
        freq * freq
    }

    pub fn x2_frequency(&self, n: i64) -> f64 {
        let n = n.unsigned_abs() as f64;
        match self.family {
            Family::GrushinTorus => 2.0 * std::f64::consts::PI * n,
            _ => std::f64::consts::PI * n,
        }
    }

    /// The degenerate coefficient `V(x₁)` of `∂²_{x₂}`.
    pub fn potential(&self, x1: f64) -> f64 {
        let g = self.gamma as i32;
        match self.family {
            Family::GrushinTorus => (std::f64::consts::FRAC_PI_2 * x1).sin().powi(2 * g),
            _ => x1.powi(2 * g),
        }
    }
}
