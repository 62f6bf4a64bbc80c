use super::{Family, OperatorSpec, SpectralError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// `u(x₁,x₂) = f(x₁)·cos(2πq x₂)` on the torus with
/// `f = Σ_p a_p cos(πp x₁) + b_p sin(πp x₁)`.
///
/// Restricting to one `x₂` frequency loses nothing: both sides of the
/// subelliptic estimate are sums over `q` without cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusTrial {
    pub q: u32,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TorusTrial {
    pub fn constant() -> Self {
        TorusTrial {
            q: 0,
            cos: vec![1.0],
            sin: vec![0.0],
        }
    }

    fn eval_x1(&self, x: f64) -> f64 {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(p, (a, b))| {
                let t = PI * p as f64 * x;
                a * t.cos() + b * t.sin()
            })
            .sum()
    }

    /// Fourier weight of `|f̂_p|²` relative to `∫_{−1}^{1}`.
    fn mass(&self, p: usize) -> f64 {
        let s = self.cos[p].powi(2) + self.sin[p].powi(2);
        if p == 0 {
            2.0 * self.cos[0].powi(2)
        } else {
            s
        }
    }
}

/// `‖u‖²_{H^{1/k}} / (‖X₁u‖² + ‖X₂u‖² + ‖u‖²)` for `X₁ = ∂_{x₁}`,
/// `X₂ = sin(πx₁/2)^γ ∂_{x₂}`, `k = γ + 1`.
///
/// The numerator and `‖X₁u‖² + ‖u‖²` are exact Fourier sums; `‖X₂u‖²` applies
/// the field pointwise and integrates on a periodic grid fine enough to be exact
/// for the band-limited integrand. The `x₂` factor is common to all terms.
pub fn subelliptic_ratio_of(gamma: u32, trial: &TorusTrial) -> f64 {
    let k = f64::from(gamma + 1);
    let wq = (2.0 * PI * f64::from(trial.q)).powi(2);
    let mut numer = 0.0;
    let mut grad1 = 0.0;
    let mut l2 = 0.0;
    for p in 0..trial.cos.len() {
        let m = trial.mass(p);
        let wp = (PI * p as f64).powi(2);
        numer += (1.0 + wp + wq).powf(1.0 / k) * m;
        grad1 += wp * m;
        l2 += m;
    }
    // f² has degree 2P, the weight degree γ in cos(πx₁): trapezoid is exact
    // with more than 2P + γ nodes per period.
    let nodes = 2 * (2 * trial.cos.len() + gamma as usize + 2);
    let h = 2.0 / nodes as f64;
    let weighted: f64 = (0..nodes)
        .map(|i| {
            let x = -1.0 + i as f64 * h;
            (0.5 * PI * x).sin().powi(2 * gamma as i32) * trial.eval_x1(x).powi(2)
        })
        .sum::<f64>()
        * h;
    numer / (grad1 + wq * weighted + l2)
}

/// Ratios for `trial_count` random band-limited trials with `x₂` frequency in
/// `[q_lo, q_hi)`. Trials are mostly Gaussian wave packets at the scale of the
/// degenerate set `x₁ = 0`, where the ratio is largest, plus random-phase data.
pub fn subelliptic_ratio(
    spec: &OperatorSpec,
    band: (u32, u32),
    trial_count: usize,
    seed: u64,
) -> Result<Vec<f64>, SpectralError> {
    if spec.family != Family::GrushinTorus {
        return Err(SpectralError::InvalidSpec {
            field: "family",
            reason: "subelliptic ratios need the torus family".into(),
        });
    }
    if band.0 < 1 || band.1 <= band.0 {
        return Err(SpectralError::InvalidSpec {
            field: "band",
            reason: format!("need 1 ≤ q_lo < q_hi, got {band:?}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trial_count);
    for t in 0..trial_count {
        let q = rng.gen_range(band.0..band.1);
        let trial = if t % 4 == 3 {
            random_phase_trial(&mut rng, q)
        } else {
            packet_trial(&mut rng, q, spec.gamma)
        };
        out.push(subelliptic_ratio_of(spec.gamma, &trial));
    }
    Ok(out)
}

/// Periodized Gaussian in `x₁` with width near the ground-state scale of
/// `−∂² + (2πq)² sin(πx₁/2)^{2γ}`, plus a random multiple of its derivative.
fn packet_trial(rng: &mut ChaCha8Rng, q: u32, gamma: u32) -> TorusTrial {
    let wq = 2.0 * PI * f64::from(q);
    let g = f64::from(gamma.max(1));
    let scale = (wq * (0.5 * PI).powf(g)).powf(-1.0 / (g + 1.0));
    let sigma = scale * 2f64.powf(rng.gen_range(-1.0..1.0));
    let center = sigma * rng.gen_range(-1.0..1.0);
    let tilt = 0.2 * sigma * rng.sample::<f64, _>(StandardNormal);
    let p_max = ((10.0 / (PI * sigma)).ceil() as usize).max(2);
    let mut cos = Vec::with_capacity(p_max + 1);
    let mut sin = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let k = PI * p as f64;
        let amp = (-0.5 * (k * sigma).powi(2)).exp();
        let (s, c) = (k * center).sin_cos();
        if p == 0 {
            cos.push(0.5 * amp);
            sin.push(0.0);
        } else {
            cos.push(amp * (c + tilt * k * s));
            sin.push(amp * (s - tilt * k * c));
        }
    }
    TorusTrial { q, cos, sin }
}

fn random_phase_trial(rng: &mut ChaCha8Rng, q: u32) -> TorusTrial {
    let p_max = rng.gen_range(1..=(4 * q as usize).max(2));
    let decay = rng.gen_range(0.5..3.0);
    let mut cos = Vec::with_capacity(p_max + 1);
    let mut sin = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let env = (1.0 + p as f64).powf(-decay);
        cos.push(env * rng.sample::<f64, _>(StandardNormal));
        sin.push(if p == 0 { 0.0 } else { env * rng.sample::<f64, _>(StandardNormal) });
    }
    TorusTrial { q, cos, sin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(gamma: u32) -> OperatorSpec {
        OperatorSpec {
            family: Family::GrushinTorus,
            ..OperatorSpec::grushin(gamma, 129, 1, 1)
        }
    }

    #[test]
    fn constant_has_ratio_one() {
        for gamma in 0..3 {
            assert!((subelliptic_ratio_of(gamma, &TorusTrial::constant()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn elliptic_ratio_is_one() {
        let r = subelliptic_ratio(&torus(0), (1, 64), 200, 3).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn grushin_ratio_bounded_across_bands() {
        let maxima: Vec<f64> = (0..4)
            .map(|b| {
                let lo = 8 << b;
                let r = subelliptic_ratio(&torus(1), (lo, 2 * lo), 200, 11).unwrap();
                r.into_iter().fold(0.0, f64::max)
            })
            .collect();
        let hi = maxima.iter().cloned().fold(0.0, f64::max);
        let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 1.5, "{maxima:?}");
    }

    #[test]
    fn pointwise_term_matches_closed_form_for_gamma_one() {
        // sin²(πx/2) = (1 − cos πx)/2 against f = cos(πx): ∫ = 1/2·∫cos² = 1/2
        let t = TorusTrial {
            q: 1,
            cos: vec![0.0, 1.0],
            sin: vec![0.0, 0.0],
        };
        let wq = (2.0 * PI).powi(2);
        let expect_denominator = PI * PI + wq * 0.5 + 1.0;
        let expect_numer = (1.0 + PI * PI + wq).sqrt();
        assert!((subelliptic_ratio_of(1, &t) - expect_numer / expect_denominator).abs() < 1e-14);
    }
}
