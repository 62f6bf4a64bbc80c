use super::NumericsError;
use std::f64::consts::FRAC_PI_2;

/// Truncation of the tanh-sinh parameter range; beyond it nodes sit within
/// ~1e-37 (relative) of the endpoints and weights are negligible.
const T_MAX: f64 = 4.0;
const DEFAULT_MAX_LEVEL: u32 = 12;
const MIN_LEVEL: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// ∫ₐᵇ f with the default refinement budget. See [`adaptive_quad_with`].
pub fn adaptive_quad<F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    adaptive_quad_with(f, a, b, tol, DEFAULT_MAX_LEVEL)
}

/// Integrates `f` over `(a, b)` by splitting at the midpoint and applying a
/// doubly-exponential (tanh-sinh) change of variable on each half, so that nodes
/// cluster at every endpoint. Step halving continues until two successive
/// levels agree within `tol`; the difference is the reported error estimate.
///
/// Integrands that vanish like `e^{-c/t}` at an endpoint, which defeat fixed
/// panels, are handled without special treatment.
pub fn adaptive_quad_with<F>(f: F, a: f64, b: f64, tol: f64, max_level: u32) -> Result<QuadratureResult, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::InvalidInput(format!("quadrature needs a < b, got ({a}, {b})")));
    }
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidInput(format!("quadrature tolerance must be positive, got {tol}")));
    }
    let mid = 0.5 * (a + b);
    let halves = [(a, mid), (mid, b)];
    let mut evaluations = 0usize;
    let mut eval = |x: f64| -> Result<f64, NumericsError> {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NumericsError::InvalidInput(format!("integrand not finite at x = {x}")))
        }
    };

    // level 0: h = 1/2, all nodes
    let mut h = 0.5;
    let mut sum = 0.0;
    let kmax = (T_MAX / h) as i64;
    for k in -kmax..=kmax {
        for &(lo, hi) in &halves {
            sum += node_contribution(&mut eval, lo, hi, k as f64 * h)?;
        }
    }
    let mut estimate = h * sum;
    let mut last_diff = f64::INFINITY;
    for level in 1..=max_level {
        h *= 0.5;
        let kmax = (T_MAX / h) as i64;
        let mut k = -kmax + if kmax % 2 == 0 { 1 } else { 0 };
        while k <= kmax {
            for &(lo, hi) in &halves {
                sum += node_contribution(&mut eval, lo, hi, k as f64 * h)?;
            }
            k += 2;
        }
        let next = h * sum;
        last_diff = (next - estimate).abs();
        estimate = next;
        if level >= MIN_LEVEL && last_diff <= tol {
            return Ok(QuadratureResult {
                value: estimate,
                abs_error_estimate: last_diff,
                evaluations,
            });
        }
    }
    Err(NumericsError::QuadratureNotConverged {
        tol,
        best: QuadratureResult {
            value: estimate,
            abs_error_estimate: last_diff,
            evaluations,
        },
    })
}

/// Weight × f at the tanh-sinh node with parameter `t` on `[lo, hi]`.
/// Distances to the nearest endpoint are formed directly so that nodes do not
/// collapse onto the endpoint in floating point.
fn node_contribution<E>(eval: &mut E, lo: f64, hi: f64, t: f64) -> Result<f64, NumericsError>
where
    E: FnMut(f64) -> Result<f64, NumericsError>,
{
    let r = 0.5 * (hi - lo);
    let u = FRAC_PI_2 * t.sinh();
    let q = (-2.0 * u.abs()).exp();
    // 1 − tanh|u| = 2q/(1+q);  sech²u = 4q/(1+q)²
    let gap = r * 2.0 * q / (1.0 + q);
    let weight = r * FRAC_PI_2 * t.cosh() * 4.0 * q / ((1.0 + q) * (1.0 + q));
    if gap == 0.0 || weight == 0.0 {
        return Ok(0.0);
    }
    let x = if u < 0.0 { lo + gap } else { hi - gap };
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    Ok(weight * eval(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial() {
        let r = adaptive_quad(|x| x * x, 0.0, 1.0, 1e-14).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.abs_error_estimate >= 0.0);
        assert!(r.evaluations > 0);
    }

    #[test]
    fn essential_decay_bound() {
        // 1/t + 1/(1−t) ≥ 4 on (0,1)
        let r = adaptive_quad(|t: f64| (-(1.0 / t + 1.0 / (1.0 - t))).exp(), 0.0, 1.0, 1e-14).unwrap();
        assert!(r.value <= (-4.0f64).exp());
        assert!(r.value > 0.0);
    }

    #[test]
    fn endpoint_singularity() {
        let r = adaptive_quad(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_carries_best_estimate() {
        let err = adaptive_quad_with(|x: f64| (50.0 * x).sin(), 0.0, 3.0, 1e-15, 3).unwrap_err();
        match err {
            NumericsError::QuadratureNotConverged { best, .. } => assert!(best.evaluations > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_reversed_interval() {
        assert!(adaptive_quad(|x| x, 1.0, 0.0, 1e-8).is_err());
    }
}
