use super::gram::spatial_cross_gram;
use super::{EvolutionError, ObservationRegion};
use crate::spectral::{trig_integrals, SpectralError, SpectralVector};
use std::sync::Arc;

/// Cauchy data `(u, ∂_t u)` for `∂²_t u + Lu = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: SpectralVector,
    pub ut: SpectralVector,
}

impl WaveState {
    pub fn new(u: SpectralVector, ut: SpectralVector) -> Result<Self, EvolutionError> {
        if !u.same_basis(&ut) {
            return Err(SpectralError::BasisMismatch.into());
        }
        Ok(WaveState { u, ut })
    }
}

/// Mode-wise exact propagation; `λ = 0` modes move linearly.
pub fn wave_evolve(w0: &WaveState, t: f64) -> Result<WaveState, EvolutionError> {
    let basis = Arc::clone(w0.u.basis());
    let n = basis.len();
    let mut u = Vec::with_capacity(n);
    let mut ut = Vec::with_capacity(n);
    for ((a, b), m) in w0.u.coeffs().iter().zip(w0.ut.coeffs()).zip(basis.modes()) {
        if m.lambda == 0.0 {
            u.push(a + t * b);
            ut.push(*b);
        } else {
            let om = m.lambda.sqrt();
            let (s, c) = (om * t).sin_cos();
            u.push(c * a + s / om * b);
            ut.push(-om * s * a + c * b);
        }
    }
    Ok(WaveState {
        u: SpectralVector::new(Arc::clone(&basis), u)?,
        ut: SpectralVector::new(basis, ut)?,
    })
}

/// `½(‖L^{s/2}u‖² + ‖L^{(s−1)/2}∂_t u‖²)`, conserved by the flow. Kernel
/// modes move linearly and contribute their conserved `½(∂_t u)²` for every `s`.
pub fn wave_energy(w: &WaveState, s: f64) -> f64 {
    let u = w.u.weighted_square(|l| if l == 0.0 { 0.0 } else { l.powf(s) });
    let ut = w.ut.weighted_square(|l| if l == 0.0 { 1.0 } else { l.powf(s - 1.0) });
    0.5 * (u + ut)
}

/// Time profile of a coefficient: `cos(ωt)`, `sin(ωt)/ω`, or `1`, `t` when `ω = 0`.
#[derive(Clone, Copy)]
enum TimeFactor {
    Cos(f64),
    SinOver(f64),
    One,
    Lin,
}

fn factors(lambda: f64) -> (TimeFactor, TimeFactor) {
    if lambda == 0.0 {
        (TimeFactor::One, TimeFactor::Lin)
    } else {
        let om = lambda.sqrt();
        (TimeFactor::Cos(om), TimeFactor::SinOver(om))
    }
}

/// `∫_{t₀}^{t₁} f(t)g(t) dt` in closed form.
fn time_integral(f: TimeFactor, g: TimeFactor, t0: f64, t1: f64) -> f64 {
    use TimeFactor::*;
    let c = |k: f64| trig_integrals(k, t0, t1).0;
    let s = |k: f64| trig_integrals(k, t0, t1).1;
    let at = |h: &dyn Fn(f64) -> f64| h(t1) - h(t0);
    match (f, g) {
        (Cos(p), Cos(q)) => 0.5 * (c(p - q) + c(p + q)),
        (Cos(p), SinOver(q)) => 0.5 * (s(q + p) + s(q - p)) / q,
        (SinOver(q), Cos(p)) => 0.5 * (s(q + p) + s(q - p)) / q,
        (SinOver(p), SinOver(q)) => 0.5 * (c(p - q) - c(p + q)) / (p * q),
        (One, One) => t1 - t0,
        (One, Lin) | (Lin, One) => 0.5 * (t1 * t1 - t0 * t0),
        (Lin, Lin) => (t1.powi(3) - t0.powi(3)) / 3.0,
        (One, Cos(q)) | (Cos(q), One) => c(q),
        (One, SinOver(q)) | (SinOver(q), One) => s(q) / q,
        (Lin, Cos(q)) | (Cos(q), Lin) => at(&|t| t * (q * t).sin() / q + (q * t).cos() / (q * q)),
        (Lin, SinOver(q)) | (SinOver(q), Lin) => at(&|t| (-t * (q * t).cos() / q + (q * t).sin() / (q * q)) / q),
    }
}

/// `∫_{t₀}^{t₁}∫_ω |u(t)|²` for the wave solution with data `w0`.
pub fn restricted_wave_norm(w0: &WaveState, region: &ObservationRegion) -> Result<f64, EvolutionError> {
    region.validate()?;
    if !w0.u.same_basis(&w0.ut) {
        return Err(SpectralError::BasisMismatch.into());
    }
    let (a, b) = (w0.u.coeffs(), w0.ut.coeffs());
    let support: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0 || b[j] != 0.0).collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    let basis = w0.u.basis();
    let gram = spatial_cross_gram(basis, region, &support);
    let (t0, t1) = region.t_range;
    let mut total = 0.0;
    for (p, &i) in support.iter().enumerate() {
        let (ci, si) = factors(basis.modes()[i].lambda);
        for (q, &j) in support.iter().enumerate() {
            let s = gram.get(p, q);
            if s == 0.0 {
                continue;
            }
            let (cj, sj) = factors(basis.modes()[j].lambda);
            let pair = a[i] * a[j] * time_integral(ci, cj, t0, t1)
                + a[i] * b[j] * time_integral(ci, sj, t0, t1)
                + b[i] * a[j] * time_integral(si, cj, t0, t1)
                + b[i] * b[j] * time_integral(si, sj, t0, t1);
            total += s * pair;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::mode_mass;
    use crate::spectral::{build_basis, Family, OperatorSpec, SpectralBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(family: Family) -> Arc<SpectralBasis> {
        Arc::new(
            build_basis(&OperatorSpec {
                family,
                ..OperatorSpec::grushin(1, 513, 8, 3)
            })
            .unwrap(),
        )
    }

    fn random_state(b: &Arc<SpectralBasis>, seed: u64) -> WaveState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WaveState::new(
            SpectralVector::random(b.clone(), &mut rng, f64::INFINITY),
            SpectralVector::random(b.clone(), &mut rng, f64::INFINITY),
        )
        .unwrap()
    }

    #[test]
    fn eigenmode_data() {
        let b = basis(Family::GrushinRectangle);
        let w = WaveState::new(SpectralVector::unit(b.clone(), 4), SpectralVector::zeros(b.clone())).unwrap();
        let t = 0.37;
        let out = wave_evolve(&w, t).unwrap();
        let om = b.modes()[4].lambda.sqrt();
        assert!((out.u.coeffs()[4] - (om * t).cos()).abs() < 1e-15);
        assert_eq!(wave_evolve(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn energy_and_reversibility() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let b = basis(family);
            let w = random_state(&b, 2);
            for s in [0.0, 0.5, 1.0, 2.0] {
                let e0 = wave_energy(&w, s);
                for t in [0.1, 1.3, -2.7, 10.0] {
                    let e = wave_energy(&wave_evolve(&w, t).unwrap(), s);
                    assert!((e / e0 - 1.0).abs() < 1e-12, "{family:?} s={s} t={t}");
                }
            }
            let back = wave_evolve(&wave_evolve(&w, 1.7).unwrap(), -1.7).unwrap();
            for (x, y) in back.u.coeffs().iter().zip(w.u.coeffs()).chain(back.ut.coeffs().iter().zip(w.ut.coeffs())) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn full_domain_cos_squared() {
        let b = basis(Family::GrushinRectangle);
        let j = 6;
        let w = WaveState::new(SpectralVector::unit(b.clone(), j), SpectralVector::zeros(b.clone())).unwrap();
        let t = 1.3;
        let r = ObservationRegion {
            t_range: (-t, t),
            ..ObservationRegion::full(1.0)
        };
        let om = b.modes()[j].lambda.sqrt();
        let expect = t + (2.0 * om * t).sin() / (2.0 * om);
        assert!((restricted_wave_norm(&w, &r).unwrap() - expect).abs() < 1e-10);
        let z = WaveState::new(SpectralVector::zeros(b.clone()), SpectralVector::zeros(b)).unwrap();
        assert_eq!(restricted_wave_norm(&z, &r).unwrap(), 0.0);
    }

    #[test]
    fn time_average_brackets_mass() {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 1025, 20, 1)).unwrap());
        let j = b.ground_mode(20).unwrap();
        let w = WaveState::new(SpectralVector::unit(b.clone(), j), SpectralVector::zeros(b.clone())).unwrap();
        let t = 5.0;
        let r = ObservationRegion::new((0.2, 0.8), (0.0, 1.0), (-t, t)).unwrap();
        let ratio = restricted_wave_norm(&w, &r).unwrap() / (2.0 * t) / mode_mass(&b, &r, j);
        // the time average of cos² is ½ up to an oscillation of size 1/(4ωT)
        let om = b.modes()[j].lambda.sqrt();
        let slack = 1.0 / (4.0 * om * t);
        assert!(ratio >= 0.5 - slack && ratio <= 2.0, "{ratio}");
        assert!((ratio - 0.5).abs() <= slack);
    }

    /// Direct midpoint quadrature in time of the synthesized coefficients.
    #[test]
    fn closed_form_matches_time_quadrature() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let b = basis(family);
            let w = random_state(&b, 8);
            let r = ObservationRegion::new((-0.4, 0.6), (0.1, 0.7), (-0.3, 0.5)).unwrap();
            let idx: Vec<usize> = (0..b.len()).collect();
            let g = spatial_cross_gram(&b, &r, &idx);
            let steps = 20000;
            let dt = 0.8 / steps as f64;
            let mut direct = 0.0;
            for k in 0..steps {
                let t = -0.3 + (k as f64 + 0.5) * dt;
                let u = wave_evolve(&w, t).unwrap();
                let c = u.u.coeffs();
                let mut q = 0.0;
                for i in 0..b.len() {
                    for j in 0..b.len() {
                        q += c[i] * c[j] * g.get(i, j);
                    }
                }
                direct += q * dt;
            }
            let closed = restricted_wave_norm(&w, &r).unwrap();
            assert!((closed / direct - 1.0).abs() < 1e-6, "{family:?} {closed} {direct}");
        }
    }
}
