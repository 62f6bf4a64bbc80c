//! Sub-Riemannian systems given by a frame of vector fields `X₁…X_m` on `ℝ^d`,
//! their normal geodesics, the metric `g` and shooting estimates of `d(x, ω)`.
//!
//! The Heisenberg entry lives on the universal cover `ℝ³`; periodic quotients
//! are handled by restricting queries to a fundamental box.

mod flow;
mod shoot;

pub use flow::{flow_geodesic, path_length, sr_metric, sr_metric_control, velocity, GeodesicPath, PathSample};
pub use shoot::{distance_to_set, min_observation_time, ShootingOptions};

use crate::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite state at s = {s}")]
    NonFinite { s: f64 },
    #[error("path is not horizontal at s = {s}")]
    NotHorizontal { s: f64 },
    #[error("no shot out of {shots} reached the target within S = {s_max} (closest gap {closest_gap})")]
    Unreachable { shots: usize, s_max: f64, closest_gap: f64 },
    #[error("distance from {x:?} failed: {source}")]
    AtPoint {
        x: Vec<f64>,
        #[source]
        source: Box<GeometryError>,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// `X₁ = ∂₁`, `X₂ = x₁^γ ∂₂` on `ℝ²`.
    Grushin(u32),
    /// `X₁ = ∂_x + 2y∂_s`, `X₂ = ∂_y − 2x∂_s` on `ℝ³`.
    Heisenberg,
    /// The flat frame `∂₁ … ∂_d`.
    Elliptic(usize),
}

/// A frame of analytic vector fields with hand-coded Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrSystem {
    kind: SystemKind,
}

impl SrSystem {
    pub fn grushin(gamma: u32) -> Self {
        SrSystem {
            kind: SystemKind::Grushin(gamma),
        }
    }

    pub fn heisenberg() -> Self {
        SrSystem {
            kind: SystemKind::Heisenberg,
        }
    }

    pub fn elliptic(d: usize) -> Result<Self, GeometryError> {
        if d == 0 {
            return Err(GeometryError::InvalidInput("dimension must be at least 1".into()));
        }
        Ok(SrSystem {
            kind: SystemKind::Elliptic(d),
        })
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            SystemKind::Grushin(g) => format!("grushin({g})"),
            SystemKind::Heisenberg => "heisenberg".into(),
            SystemKind::Elliptic(d) => format!("elliptic({d})"),
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SystemKind::Grushin(_) => 2,
            SystemKind::Heisenberg => 3,
            SystemKind::Elliptic(d) => d,
        }
    }

    pub fn field_count(&self) -> usize {
        match self.kind {
            SystemKind::Grushin(_) | SystemKind::Heisenberg => 2,
            SystemKind::Elliptic(d) => d,
        }
    }

    /// Writes `X_i(x)` into `out`.
    pub fn field(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self.kind {
            SystemKind::Grushin(g) => {
                if i == 0 {
                    out[0] = 1.0;
                } else {
                    out[1] = x[0].powi(g as i32);
                }
            }
            SystemKind::Heisenberg => {
                if i == 0 {
                    out[0] = 1.0;
                    out[2] = 2.0 * x[1];
                } else {
                    out[1] = 1.0;
                    out[2] = -2.0 * x[0];
                }
            }
            SystemKind::Elliptic(_) => out[i] = 1.0,
        }
    }

    /// Writes the row-major Jacobian `J[a][b] = ∂X_i^a/∂x_b` into `out`.
    pub fn field_jacobian(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = self.dim();
        match self.kind {
            SystemKind::Grushin(g) => {
                if i == 1 && g > 0 {
                    out[d] = f64::from(g) * x[0].powi(g as i32 - 1);
                }
            }
            SystemKind::Heisenberg => {
                if i == 0 {
                    out[2 * d + 1] = 2.0;
                } else {
                    out[2 * d] = -2.0;
                }
            }
            SystemKind::Elliptic(_) => {}
        }
    }

    /// Largest discrepancy between the coded Jacobians and central differences at `x`.
    pub fn jacobian_fd_error(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut jac = vec![0.0; d * d];
        let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
        let mut xp = x.to_vec();
        for i in 0..self.field_count() {
            self.field_jacobian(i, x, &mut jac);
            for b in 0..d {
                xp[b] = x[b] + h;
                self.field(i, &xp, &mut fp);
                xp[b] = x[b] - h;
                self.field(i, &xp, &mut fm);
                xp[b] = x[b];
                for a in 0..d {
                    let fd = (fp[a] - fm[a]) / (2.0 * h);
                    worst = worst.max((fd - jac[a * d + b]).abs());
                }
            }
        }
        worst
    }

    /// `⟨ξ, X_i(x)⟩` for every field.
    pub fn pairings(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        (0..self.field_count())
            .map(|i| {
                self.field(i, x, &mut f);
                f.iter().zip(xi).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// A point of `T*ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentState {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl CotangentState {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self, GeometryError> {
        if x.len() != xi.len() {
            return Err(GeometryError::InvalidInput(format!(
                "position has {} components, covector {}",
                x.len(),
                xi.len()
            )));
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { s: 0.0 });
        }
        Ok(CotangentState { x, xi })
    }
}

/// `ℓ(x, ξ) = Σ_i ⟨ξ, X_i(x)⟩²`.
pub fn hamiltonian(sys: &SrSystem, st: &CotangentState) -> f64 {
    sys.pairings(&st.x, &st.xi).iter().map(|p| p * p).sum()
}

/// Closed axis-aligned box; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GeometryError::InvalidInput("box bounds must have equal, positive length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(GeometryError::InvalidInput(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Euclidean distance from `x` to the box.
    pub fn gap(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (a - v).max(v - b).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b) && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_examples() {
        let e = SrSystem::elliptic(2).unwrap();
        let st = CotangentState::new(vec![0.3, -1.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(hamiltonian(&e, &st), 25.0);
        let g = SrSystem::grushin(1);
        let st = CotangentState::new(vec![0.0, 0.7], vec![1.5, 9.0]).unwrap();
        assert_eq!(hamiltonian(&g, &st), 2.25);
        let h = SrSystem::heisenberg();
        let st = CotangentState::new(vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(hamiltonian(&h, &st), 20.0);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let systems = [
            SrSystem::grushin(1),
            SrSystem::grushin(2),
            SrSystem::grushin(3),
            SrSystem::heisenberg(),
            SrSystem::elliptic(3).unwrap(),
        ];
        for sys in systems {
            for x in [[0.3, -0.7, 0.2], [-1.1, 0.4, 2.0], [0.0, 0.0, 0.0]] {
                assert!(sys.jacobian_fd_error(&x[..sys.dim()]) < 1e-6, "{}", sys.name());
            }
        }
    }

    #[test]
    fn box_membership() {
        let b = BoxRegion::new(vec![0.3, f64::NEG_INFINITY], vec![0.4, f64::INFINITY]).unwrap();
        assert!(b.contains(&[0.35, 100.0]));
        assert!(!b.contains(&[0.2, 0.0]));
        assert!((b.gap(&[0.0, 5.0]) - 0.3).abs() < 1e-15);
        assert!(BoxRegion::new(vec![1.0], vec![0.0]).is_err());
    }
}
