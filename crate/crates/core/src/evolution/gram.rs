use super::{EvolutionError, ObservationRegion};
use crate::numerics::SymMatrix;
use crate::spectral::{x2_overlap, SpectralBasis, SpectralVector};
use rayon::prelude::*;

/// Weights `w` on the `grid_n` nodes of `[−1,1]` with `Σ w_k f_k = ∫_a^b f̃`,
/// `f̃` the piecewise-linear interpolant of the node values. On grid-aligned
/// intervals this is the trapezoid rule.
pub fn x1_weights(grid_n: usize, a: f64, b: f64) -> Vec<f64> {
    let h = 2.0 / (grid_n - 1) as f64;
    let mut w = vec![0.0; grid_n];
    let first = (((a + 1.0) / h).floor().max(0.0) as usize).min(grid_n - 2);
    for k in first..grid_n - 1 {
        let xk = -1.0 + k as f64 * h;
        if xk >= b {
            break;
        }
        let sc = ((a - xk) / h).clamp(0.0, 1.0);
        let sd = ((b - xk) / h).clamp(0.0, 1.0);
        if sd <= sc {
            continue;
        }
        let half = 0.5 * (sd * sd - sc * sc);
        w[k] += h * ((sd - sc) - half);
        w[k + 1] += h * half;
    }
    w
}

struct SpatialFactors {
    weights: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl SpatialFactors {
    fn new(basis: &SpectralBasis, region: &ObservationRegion) -> Self {
        let weights = x1_weights(basis.spec().grid_n, region.x1_range.0, region.x1_range.1);
        let lo = weights.iter().position(|w| *w != 0.0).unwrap_or(0);
        let hi = weights.iter().rposition(|w| *w != 0.0).map_or(0, |i| i + 1);
        SpatialFactors { weights, lo, hi }
    }

    fn entry(&self, basis: &SpectralBasis, region: &ObservationRegion, i: usize, j: usize) -> f64 {
        let (mi, mj) = (&basis.modes()[i], &basis.modes()[j]);
        let x2 = if region.covers_x2() {
            if mi.x2 == mj.x2 {
                1.0
            } else {
                return 0.0;
            }
        } else {
            x2_overlap(mi.x2, mj.x2, region.x2_range.0, region.x2_range.1)
        };
        let x1: f64 = (self.lo..self.hi)
            .map(|k| self.weights[k] * mi.profile[k] * mj.profile[k])
            .sum();
        x1 * x2
    }
}

/// Symmetric fill of `f(i, j)` over `indices × indices`, rows in parallel.
fn assemble(indices: &[usize], f: impl Fn(usize, usize) -> f64 + Sync) -> SymMatrix {
    let rows: Vec<Vec<f64>> = indices
        .par_iter()
        .enumerate()
        .map(|(a, &i)| indices[a..].iter().map(|&j| f(i, j)).collect())
        .collect();
    let mut m = SymMatrix::zeros(indices.len());
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m.set(a, a + off, v);
        }
    }
    m
}

/// `∫_ω φ_i φ_j` for the listed modes.
pub fn spatial_cross_gram(basis: &SpectralBasis, region: &ObservationRegion, indices: &[usize]) -> SymMatrix {
    let sf = SpatialFactors::new(basis, region);
    assemble(indices, |i, j| sf.entry(basis, region, i, j))
}

/// `‖φ_j‖²_{L²(ω)}`.
pub fn mode_mass(basis: &SpectralBasis, region: &ObservationRegion, j: usize) -> f64 {
    SpatialFactors::new(basis, region).entry(basis, region, j, j)
}

/// `∫_{t₀}^{t₁} e^{−ct} dt`.
pub(crate) fn exp_integral(c: f64, t0: f64, t1: f64) -> f64 {
    let dt = t1 - t0;
    if c == 0.0 {
        return dt;
    }
    (-c * t0).exp() * (-(-c * dt).exp_m1()) / c
}

/// `G_{ij} = ∫_{t₀}^{t₁}∫_ω e^{−(λ_i+λ_j)t} φ_i φ_j`.
pub fn heat_cross_gram(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    indices: &[usize],
) -> Result<SymMatrix, EvolutionError> {
    region.validate()?;
    if region.t_range.0 < 0.0 {
        return Err(EvolutionError::NegativeTime(region.t_range.0));
    }
    let sf = SpatialFactors::new(basis, region);
    let (t0, t1) = region.t_range;
    let modes = basis.modes();
    Ok(assemble(indices, |i, j| {
        let s = sf.entry(basis, region, i, j);
        if s == 0.0 {
            0.0
        } else {
            s * exp_integral(modes[i].lambda + modes[j].lambda, t0, t1)
        }
    }))
}

/// `∫_{t₀}^{t₁}∫_ω |e^{−tL}u₀|²` (the squared space-time norm).
pub fn restricted_heat_norm(u0: &SpectralVector, region: &ObservationRegion) -> Result<f64, EvolutionError> {
    let support: Vec<usize> = (0..u0.coeffs().len()).filter(|&j| u0.coeffs()[j] != 0.0).collect();
    if support.is_empty() {
        region.validate()?;
        return Ok(0.0);
    }
    let g = heat_cross_gram(u0.basis(), region, &support)?;
    Ok(quadratic_form(&g, &support, u0.coeffs()))
}

pub(crate) fn quadratic_form(g: &SymMatrix, support: &[usize], coeffs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            total += coeffs[i] * coeffs[j] * g.get(a, b);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, Family, OperatorSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn basis(family: Family) -> Arc<SpectralBasis> {
        Arc::new(
            build_basis(&OperatorSpec {
                family,
                ..OperatorSpec::grushin(1, 513, 6, 3)
            })
            .unwrap(),
        )
    }

    #[test]
    fn weights_integrate_linear_functions() {
        let w = x1_weights(129, -0.31, 0.77);
        let h = 2.0 / 128.0;
        let xs: Vec<f64> = (0..129).map(|i| -1.0 + i as f64 * h).collect();
        let one: f64 = w.iter().sum();
        let lin: f64 = w.iter().zip(&xs).map(|(a, x)| a * x).sum();
        assert!((one - 1.08).abs() < 1e-14);
        assert!((lin - 0.5 * (0.77f64.powi(2) - 0.31f64.powi(2))).abs() < 1e-14);
        let full = x1_weights(129, -1.0, 1.0);
        assert!((full[0] - 0.5 * h).abs() < 1e-16 && (full[5] - h).abs() < 1e-16);
    }

    #[test]
    fn full_region_collapses_to_diagonal() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let b = basis(family);
            let u = SpectralVector::random(b.clone(), &mut ChaCha8Rng::seed_from_u64(5), f64::INFINITY);
            let t = 0.4;
            let got = restricted_heat_norm(&u, &ObservationRegion::full(t)).unwrap();
            let expect: f64 = u
                .coeffs()
                .iter()
                .zip(b.modes())
                .map(|(c, m)| c * c * exp_integral(2.0 * m.lambda, 0.0, t))
                .sum();
            assert!((got - expect).abs() <= 1e-10 * expect, "{family:?} {got} {expect}");
            assert_eq!(restricted_heat_norm(&SpectralVector::zeros(b), &ObservationRegion::full(t)).unwrap(), 0.0);
        }
    }

    #[test]
    fn x2_shortcut_agrees_with_explicit_overlaps() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let b = basis(family);
            let idx: Vec<usize> = (0..b.len()).collect();
            let r = ObservationRegion::new((0.2, 0.7), (0.0, 1.0), (0.0, 1.0)).unwrap();
            let fast = spatial_cross_gram(&b, &r, &idx);
            let sf = SpatialFactors::new(&b, &r);
            for i in 0..b.len() {
                for j in 0..b.len() {
                    let (mi, mj) = (&b.modes()[i], &b.modes()[j]);
                    let x1: f64 = (0..sf.weights.len()).map(|k| sf.weights[k] * mi.profile[k] * mj.profile[k]).sum();
                    let slow = x1 * x2_overlap(mi.x2, mj.x2, 0.0, 1.0);
                    assert!((fast.get(i, j) - slow).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn monotone_in_region() {
        let b = basis(Family::GrushinRectangle);
        let u = SpectralVector::random(b.clone(), &mut ChaCha8Rng::seed_from_u64(9), f64::INFINITY);
        let small = ObservationRegion::new((0.3, 0.6), (0.2, 0.5), (0.0, 0.5)).unwrap();
        let mid = ObservationRegion::new((0.2, 0.6), (0.1, 0.5), (0.0, 0.5)).unwrap();
        let big = ObservationRegion::new((0.1, 0.9), (0.0, 0.8), (0.0, 1.0)).unwrap();
        let n: Vec<f64> = [small, mid, big].iter().map(|r| restricted_heat_norm(&u, r).unwrap()).collect();
        assert!(n[0] <= n[1] && n[1] <= n[2], "{n:?}");
    }

    #[test]
    fn single_mode_mass_tracks_tunneling_estimate() {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 2049, 40, 1)).unwrap());
        let a = 0.3;
        let r = ObservationRegion::new((a, 0.9), (0.0, 1.0), (0.0, 0.1)).unwrap();
        let j = b.ground_mode(40).unwrap();
        let m = &b.modes()[j];
        let mass = mode_mass(&b, &r, j);
        let n = 40.0;
        let approx = (-a * a * n * std::f64::consts::PI).exp() / (2.0 * a * std::f64::consts::PI * n.sqrt());
        assert!(mass / approx > 0.5 && mass / approx < 2.0, "{}", mass / approx);
        let heat = restricted_heat_norm(&SpectralVector::unit(b.clone(), j), &r).unwrap();
        let expect = mass * exp_integral(2.0 * m.lambda, 0.0, 0.1);
        assert!((heat / expect - 1.0).abs() < 1e-12);
    }
}
