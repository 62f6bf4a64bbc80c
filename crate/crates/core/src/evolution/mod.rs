//! Heat semigroup `e^{−tL}` and wave group for `L` acting on spectral
//! coefficients, and space-time norms of solutions over `(t₀,t₁)×ω`.
//!
//! Time integrals are evaluated in closed form per mode pair; the spatial cross
//! Gram is exact in `x₂` and trapezoidal in `x₁` on the basis grid.

mod gram;
mod wave;

pub(crate) use gram::exp_integral;
pub use gram::{heat_cross_gram, mode_mass, restricted_heat_norm, spatial_cross_gram, x1_weights};
pub use wave::{restricted_wave_norm, wave_energy, wave_evolve, WaveState};

use crate::spectral::{SpectralError, SpectralVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid observation region: {0}")]
    InvalidRegion(String),
    #[error("negative heat time {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `ω = x1_range × x2_range` observed during `t_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRegion {
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub t_range: (f64, f64),
}

impl ObservationRegion {
    pub fn new(x1_range: (f64, f64), x2_range: (f64, f64), t_range: (f64, f64)) -> Result<Self, EvolutionError> {
        let r = ObservationRegion {
            x1_range,
            x2_range,
            t_range,
        };
        r.validate()?;
        Ok(r)
    }

    /// The whole domain observed on `(0, T)`.
    pub fn full(t: f64) -> Self {
        ObservationRegion {
            x1_range: (-1.0, 1.0),
            x2_range: (0.0, 1.0),
            t_range: (0.0, t),
        }
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        let ok = |(a, b): (f64, f64), lo: f64, hi: f64| a.is_finite() && b.is_finite() && lo <= a && a < b && b <= hi;
        if !ok(self.x1_range, -1.0, 1.0) {
            return Err(EvolutionError::InvalidRegion(format!("x1 range {:?} not inside [-1, 1]", self.x1_range)));
        }
        if !ok(self.x2_range, 0.0, 1.0) {
            return Err(EvolutionError::InvalidRegion(format!("x2 range {:?} not inside [0, 1]", self.x2_range)));
        }
        if !ok(self.t_range, f64::NEG_INFINITY, f64::INFINITY) {
            return Err(EvolutionError::InvalidRegion(format!("empty time window {:?}", self.t_range)));
        }
        Ok(())
    }

    pub fn covers_x2(&self) -> bool {
        self.x2_range == (0.0, 1.0)
    }

    /// Distance from the observed `x₁` interval to the degenerate line `x₁ = 0`.
    pub fn distance_to_singular_line(&self) -> f64 {
        let (a, b) = self.x1_range;
        if a <= 0.0 && 0.0 <= b {
            0.0
        } else {
            a.abs().min(b.abs())
        }
    }

    pub fn contains(&self, other: &ObservationRegion) -> bool {
        let inside = |o: (f64, f64), s: (f64, f64)| s.0 <= o.0 && o.1 <= s.1;
        inside(other.x1_range, self.x1_range) && inside(other.x2_range, self.x2_range) && inside(other.t_range, self.t_range)
    }
}

/// `e^{−tL}u`.
pub fn heat_evolve(u0: &SpectralVector, t: f64) -> Result<SpectralVector, EvolutionError> {
    if !(t >= 0.0) {
        return Err(EvolutionError::NegativeTime(t));
    }
    Ok(u0.apply_calculus(|l| (-t * l).exp())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn heat_semigroup() {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 257, 6, 3)).unwrap());
        let u = SpectralVector::random(b.clone(), &mut ChaCha8Rng::seed_from_u64(3), f64::INFINITY);
        assert_eq!(heat_evolve(&u, 0.0).unwrap(), u);
        let two = heat_evolve(&heat_evolve(&u, 0.013).unwrap(), 0.021).unwrap();
        let one = heat_evolve(&u, 0.034).unwrap();
        for (a, c) in two.coeffs().iter().zip(one.coeffs()) {
            assert!((a - c).abs() <= 1e-14 * c.abs().max(1e-300) + 1e-300);
        }
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let n = heat_evolve(&u, 0.01 * k as f64).unwrap().hsl_norm(0.0);
            assert!(n <= prev);
            prev = n;
        }
        let e = SpectralVector::unit(b.clone(), 2);
        let l = b.modes()[2].lambda;
        assert_eq!(heat_evolve(&e, 0.1).unwrap().coeffs()[2], (-0.1 * l).exp());
        assert!(heat_evolve(&u, -1.0).is_err());
    }

    #[test]
    fn region_checks() {
        assert!(ObservationRegion::new((0.3, 0.9), (0.0, 1.0), (0.0, 1.0)).is_ok());
        assert!(ObservationRegion::new((0.3, 1.2), (0.0, 1.0), (0.0, 1.0)).is_err());
        assert!(ObservationRegion::new((0.3, 0.9), (0.5, 0.5), (0.0, 1.0)).is_err());
        let r = ObservationRegion::new((0.3, 0.9), (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert!((r.distance_to_singular_line() - 0.3).abs() < 1e-15);
        assert!(ObservationRegion::full(1.0).contains(&r));
    }
}
