//! Heat-to-wave transmutation realized on spectral data.
//!
//! A heat solution `y(t) = e^{−tL}y₀` on `(0, T)` is mapped to the wave
//! solution with Cauchy data `(0, I(T,L)y₀)`, where
//!
//! ```text
//! I(T, λ) = ∫₀^T exp(−α(1/t + 1/(T−t))) e^{−λt} dt.
//! ```
//!
//! The kernel bound `|k_T(t,s)| ≤ C|s|·exp(…)` on the transmutation kernel is
//! not evaluated; only the action `I(T,L)` is.

use crate::evolution::{EvolutionError, WaveState};
use crate::numerics::{adaptive_quad_with, fit_loglinear, FitResult, NumericsError};
use crate::spectral::{SpectralError, SpectralVector};
use crate::textfmt::g17;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

const LOG_UNDERFLOW: f64 = -700.0;
const REL_TOL: f64 = 1e-13;
const MAX_LEVEL: u32 = 14;

#[derive(Debug, Error)]
pub enum TransmutationError {
    #[error("invalid transmutation parameters: {0}")]
    InvalidParams(String),
    #[error("I(T, λ) needs λ ≥ 0, got {0}")]
    NegativeLambda(f64),
    #[error("quadrature for λ = {lambda} failed: {source}")]
    Quadrature {
        lambda: f64,
        #[source]
        source: NumericsError,
    },
    #[error("mode {index}: {source}")]
    Mode {
        index: usize,
        #[source]
        source: Box<TransmutationError>,
    },
    #[error("operation undefined for the zero vector")]
    ZeroVector,
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Fit(#[from] NumericsError),
}

/// Heat window `T`, wave window `S` and kernel parameter `α > 2S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmuteParams {
    pub t: f64,
    pub s: f64,
    pub alpha: f64,
}

impl TransmuteParams {
    pub fn new(t: f64, s: f64, alpha: f64) -> Result<Self, TransmutationError> {
        let p = TransmuteParams { t, s, alpha };
        p.validate()?;
        Ok(p)
    }

    /// `α = 2.5·S²`.
    pub fn with_default_alpha(t: f64, s: f64) -> Result<Self, TransmutationError> {
        TransmuteParams::new(t, s, 2.5 * s * s)
    }

    pub fn validate(&self) -> Result<(), TransmutationError> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(TransmutationError::InvalidParams(format!("T must be positive, got {}", self.t)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(TransmutationError::InvalidParams(format!("S must be positive, got {}", self.s)));
        }
        if !(self.alpha > 2.0 * self.s * self.s) || !self.alpha.is_finite() {
            return Err(TransmutationError::InvalidParams(format!(
                "alpha must exceed 2·S² = {}, got {}",
                2.0 * self.s * self.s,
                self.alpha
            )));
        }
        Ok(())
    }

    /// Exponent `φ(t) = −α(1/t + 1/(T−t)) − λt` of the integrand.
    fn phase(&self, lambda: f64, t: f64) -> f64 {
        -self.alpha * (1.0 / t + 1.0 / (self.t - t)) - lambda * t
    }
}

/// `I(T, λ)` together with its logarithm. `underflow` is set (and `value` is
/// zero) when `log_value < −700`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IValue {
    pub log_value: f64,
    pub value: f64,
    pub abs_error: f64,
    pub underflow: bool,
}

/// The unique maximizer of `φ` on `(0, T)`: the root of `α/t² − α/(T−t)² − λ`,
/// which is decreasing in `t`.
fn peak(p: &TransmuteParams, lambda: f64) -> f64 {
    let dphi = |t: f64| p.alpha / (t * t) - p.alpha / ((p.t - t) * (p.t - t)) - lambda;
    let (mut lo, mut hi) = (0.0, 0.5 * p.t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dphi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `I(T, λ)` by tanh-sinh quadrature of `e^{φ(t) − φ(t*)}` on `(0, t*)` and
/// `(t*, T)`, with `t*` the peak; relative accuracy about 1e-13.
pub fn i_of_lambda(p: &TransmuteParams, lambda: f64) -> Result<IValue, TransmutationError> {
    p.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(TransmutationError::NegativeLambda(lambda));
    }
    let tp = peak(p, lambda);
    let top = p.phase(lambda, tp);
    // Laplace width sets the scale of the scaled integral
    let curvature = 2.0 * p.alpha / tp.powi(3) + 2.0 * p.alpha / (p.t - tp).powi(3);
    let scale = (2.0 * std::f64::consts::PI / curvature).sqrt().min(p.t);
    let tol = REL_TOL * scale;
    let f = |t: f64| (p.phase(lambda, t) - top).exp();
    let quad = |a: f64, b: f64| {
        adaptive_quad_with(f, a, b, tol, MAX_LEVEL).map_err(|source| TransmutationError::Quadrature { lambda, source })
    };
    let left = quad(0.0, tp)?;
    let right = quad(tp, p.t)?;
    let scaled = left.value + right.value;
    let log_value = top + scaled.ln();
    let underflow = log_value < LOG_UNDERFLOW;
    Ok(IValue {
        log_value,
        value: if underflow { 0.0 } else { log_value.exp() },
        abs_error: (left.abs_error_estimate + right.abs_error_estimate) * top.exp(),
        underflow,
    })
}

/// `log` of `√π·α^{1/4}·λ^{−3/4}·e^{−α/T}·e^{−2√(αλ)}`.
pub fn log_i_asymptotic(p: &TransmuteParams, lambda: f64) -> f64 {
    0.5 * std::f64::consts::PI.ln() + 0.25 * p.alpha.ln() - 0.75 * lambda.ln() - p.alpha / p.t - 2.0 * (p.alpha * lambda).sqrt()
}

/// Leading Laplace asymptotics of `I(T, λ)` for large `λ`.
pub fn i_asymptotic(p: &TransmuteParams, lambda: f64) -> f64 {
    log_i_asymptotic(p, lambda).exp()
}

/// Initial data `(0, I(T,L)y₀)` of the transmuted wave solution.
pub fn transmute(p: &TransmuteParams, y0: &SpectralVector) -> Result<WaveState, TransmutationError> {
    p.validate()?;
    let basis = Arc::clone(y0.basis());
    let velocity: Vec<f64> = y0
        .coeffs()
        .par_iter()
        .zip(basis.modes().par_iter())
        .enumerate()
        .map(|(index, (c, m))| {
            if *c == 0.0 {
                return Ok(0.0);
            }
            i_of_lambda(p, m.lambda)
                .map(|iv| iv.value * c)
                .map_err(|e| TransmutationError::Mode {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(WaveState::new(
        SpectralVector::zeros(Arc::clone(&basis)),
        SpectralVector::new(basis, velocity)?,
    )?)
}

/// Independent evaluation of `∫₀^T e^{−α(1/t+1/(T−t))} e^{−λ_j t} y₀_j dt`:
/// the integrand is used as is on `(0, T)`, without peak shifting or log scaling.
pub fn direct_velocity(p: &TransmuteParams, y0: &SpectralVector, j: usize) -> Result<f64, TransmutationError> {
    let lambda = y0.basis().modes()[j].lambda;
    let c = y0.coeffs()[j];
    let f = |t: f64| c * (-p.alpha * (1.0 / t + 1.0 / (p.t - t)) - lambda * t).exp();
    let err = |source| TransmutationError::Quadrature { lambda, source };
    let rough = adaptive_quad_with(f, 0.0, p.t, f64::MIN_POSITIVE, 8).or_else(|e| match e {
        NumericsError::QuadratureNotConverged { best, .. } => Ok(best),
        other => Err(err(other)),
    })?;
    let tol = (1e-14 * rough.value.abs()).max(f64::MIN_POSITIVE);
    Ok(adaptive_quad_with(f, 0.0, p.t, tol, 16).map_err(err)?.value)
}

/// `(lower, mid, upper)` with `mid = ‖I(T,L)y₀‖_{H^s_L}` and `lower`, `upper` the
/// weighted norm `‖(1+L)^{(s−3/2)/2} e^{−2√(αL)} y₀‖` times the extreme ratios of
/// `I(T,λ)` to `(1+λ)^{−3/4}e^{−2√(αλ)}` over the support of `y₀`.
pub fn norm_equivalence_check(
    p: &TransmuteParams,
    y0: &SpectralVector,
    s: f64,
) -> Result<(f64, f64, f64), TransmutationError> {
    if y0.l2_norm() == 0.0 {
        return Err(TransmutationError::ZeroVector);
    }
    let modes = y0.basis().modes();
    let mut mid2 = 0.0;
    let mut weighted2 = 0.0;
    let mut c_lo = f64::INFINITY;
    let mut c_hi: f64 = 0.0;
    for (index, (c, m)) in y0.coeffs().iter().zip(modes).enumerate() {
        if *c == 0.0 {
            continue;
        }
        let iv = i_of_lambda(p, m.lambda).map_err(|e| TransmutationError::Mode {
            index,
            source: Box::new(e),
        })?;
        let log_w = -0.75 * (1.0 + m.lambda).ln() - 2.0 * (p.alpha * m.lambda).sqrt();
        let ratio = (iv.log_value - log_w).exp();
        c_lo = c_lo.min(ratio);
        c_hi = c_hi.max(ratio);
        let sob = (1.0 + m.lambda).powf(s);
        mid2 += sob * (2.0 * iv.log_value).exp() * c * c;
        weighted2 += sob * (2.0 * log_w).exp() * c * c;
    }
    let weighted = weighted2.sqrt();
    Ok((c_lo * weighted, mid2.sqrt(), c_hi * weighted))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub i_num: f64,
    pub i_asym: f64,
    pub ratio: f64,
}

/// `I`, its asymptotic form and their ratio (formed in log space) on a λ grid.
pub fn lambda_sweep(p: &TransmuteParams, lambdas: &[f64]) -> Result<Vec<SweepRow>, TransmutationError> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let iv = i_of_lambda(p, lambda)?;
            let la = log_i_asymptotic(p, lambda);
            Ok(SweepRow {
                lambda,
                i_num: iv.value,
                i_asym: la.exp(),
                ratio: (iv.log_value - la).exp(),
            })
        })
        .collect()
}

/// Least-squares exponent of `|ratio − 1|` against `λ` on log-log axes.
pub fn correction_exponent(rows: &[SweepRow]) -> Result<FitResult, TransmutationError> {
    let xs: Vec<f64> = rows.iter().map(|r| r.lambda.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs().ln()).collect();
    Ok(fit_loglinear(&xs, &ys)?)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,I_num,I_asym,ratio\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", g17(r.lambda), g17(r.i_num), g17(r.i_asym), g17(r.ratio));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_params() -> TransmuteParams {
        TransmuteParams { t: 1.0, s: 0.5, alpha: 1.0 }
    }

    #[test]
    fn params_validation() {
        assert!(TransmuteParams::new(1.0, 1.0, 2.0).is_err());
        assert!(TransmuteParams::new(1.0, 1.0, 2.01).is_ok());
        assert_eq!(TransmuteParams::with_default_alpha(1.0, 2.0).unwrap().alpha, 10.0);
        assert!(TransmuteParams::new(0.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn bound_and_monotonicity() {
        let p = unit_params();
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let l = if k == 0 { 0.0 } else { 1.5f64.powi(k) };
            let v = i_of_lambda(&p, l).unwrap();
            assert!(v.log_value < prev);
            assert!(v.value <= p.t * (-4.0 * p.alpha / p.t).exp());
            assert_eq!(v.underflow, v.value == 0.0);
            prev = v.log_value;
        }
        assert!(i_of_lambda(&p, -1.0).is_err());
    }

    #[test]
    fn zero_lambda_against_plain_quadrature() {
        let p = TransmuteParams { t: 2.0, s: 0.5, alpha: 0.7 };
        let direct = crate::numerics::adaptive_quad(|t: f64| (-0.7 * (1.0 / t + 1.0 / (2.0 - t))).exp(), 0.0, 2.0, 1e-15)
            .unwrap()
            .value;
        let v = i_of_lambda(&p, 0.0).unwrap().value;
        assert!((v / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_algebra_and_limit() {
        let p = unit_params();
        let (a, b) = (i_asymptotic(&p, 400.0), i_asymptotic(&p, 800.0));
        let expect = 2f64.powf(-0.75) * (-2.0 * (p.alpha * 400.0f64).sqrt() * (2f64.sqrt() - 1.0)).exp();
        assert!((b / a / expect - 1.0).abs() < 1e-12);
        let rows = lambda_sweep(&p, &[1e2, 1e3, 1e4, 1e5]).unwrap();
        assert!((rows[2].ratio - 1.0).abs() <= 0.15);
        let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(sweep_csv(&rows).starts_with("lambda,I_num,I_asym,ratio\n100,"));
    }

    #[test]
    fn underflow_is_flagged() {
        let p = TransmuteParams { t: 1.0, s: 1.0, alpha: 50.0 };
        let v = i_of_lambda(&p, 1e4).unwrap();
        assert!(v.underflow && v.value == 0.0 && v.log_value.is_finite());
    }

    #[test]
    fn transmute_matches_direct_quadrature() {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 257, 10, 5)).unwrap());
        let p = TransmuteParams::with_default_alpha(1.0, 1.0).unwrap();
        let z = transmute(&p, &SpectralVector::zeros(b.clone())).unwrap();
        assert!(z.u.coeffs().iter().chain(z.ut.coeffs()).all(|c| *c == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y0 = SpectralVector::random(b.clone(), &mut rng, f64::INFINITY);
        let w = transmute(&p, &y0).unwrap();
        assert!(w.u.coeffs().iter().all(|c| *c == 0.0));
        for _ in 0..10 {
            let j = rng.gen_range(0..b.len());
            let direct = direct_velocity(&p, &y0, j).unwrap();
            assert!((w.ut.coeffs()[j] / direct - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sandwich() {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 257, 30, 6)).unwrap());
        let p = TransmuteParams::with_default_alpha(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // frozen constants from the λ-sweep over the retained spectrum up to 500
        let ratios: Vec<f64> = b
            .modes()
            .iter()
            .filter(|m| m.lambda <= 500.0)
            .map(|m| {
                let iv = i_of_lambda(&p, m.lambda).unwrap();
                (iv.log_value + 0.75 * (1.0 + m.lambda).ln() + 2.0 * (p.alpha * m.lambda).sqrt()).exp()
            })
            .collect();
        let c_lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_hi = ratios.iter().cloned().fold(0.0, f64::max);
        for s in [-1.0, 0.0, 1.0, 2.0] {
            for _ in 0..20 {
                let y0 = SpectralVector::random(b.clone(), &mut rng, 500.0);
                let (lo, mid, hi) = norm_equivalence_check(&p, &y0, s).unwrap();
                assert!(lo <= mid * (1.0 + 1e-12) && mid <= hi * (1.0 + 1e-12));
                let weighted = y0
                    .apply_calculus(|l| (1.0 + l).powf((s - 1.5) / 2.0) * (-2.0 * (p.alpha * l).sqrt()).exp())
                    .unwrap()
                    .l2_norm();
                assert!(mid >= c_lo * weighted * (1.0 - 1e-12) && mid <= c_hi * weighted * (1.0 + 1e-12));
            }
        }
        let one = SpectralVector::unit(b.clone(), 3);
        let (lo, mid, hi) = norm_equivalence_check(&p, &one, 0.5).unwrap();
        assert!((lo / mid - 1.0).abs() < 1e-12 && (hi / mid - 1.0).abs() < 1e-12);
        assert!(matches!(
            norm_equivalence_check(&p, &SpectralVector::zeros(b), 0.0),
            Err(TransmutationError::ZeroVector)
        ));
    }
}
