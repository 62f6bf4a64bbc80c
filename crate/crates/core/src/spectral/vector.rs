use super::basis::interpolate;
use super::{SpectralBasis, SpectralError};
use crate::textfmt::g17;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::sync::Arc;

const GEVREY_EXPONENT_LIMIT: f64 = 700.0;

/// Coefficients `u_j` of `u = Σ u_j φ_j` in a shared basis.
#[derive(Debug, Clone)]
pub struct SpectralVector {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralVector {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) && self.coeffs == other.coeffs
    }
}

impl SpectralVector {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != basis.len() {
            return Err(SpectralError::Length {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFiniteCalculus {
                index,
                lambda: basis.modes()[index].lambda,
            });
        }
        Ok(SpectralVector { basis, coeffs })
    }

    pub fn zeros(basis: Arc<SpectralBasis>) -> Self {
        let coeffs = vec![0.0; basis.len()];
        SpectralVector { basis, coeffs }
    }

    /// The eigenfunction `φ_j`.
    pub fn unit(basis: Arc<SpectralBasis>, j: usize) -> Self {
        let mut u = SpectralVector::zeros(basis);
        u.coeffs[j] = 1.0;
        u
    }

    /// Independent standard normal coefficients on the modes with `λ ≤ lambda_max`.
    pub fn random<R: Rng + ?Sized>(basis: Arc<SpectralBasis>, rng: &mut R, lambda_max: f64) -> Self {
        let coeffs = basis
            .modes()
            .iter()
            .map(|m| if m.lambda <= lambda_max { rng.sample(StandardNormal) } else { 0.0 })
            .collect();
        SpectralVector { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn same_basis(&self, other: &SpectralVector) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
    }

    /// `f(L)u`.
    pub fn apply_calculus(&self, f: impl Fn(f64) -> f64) -> Result<SpectralVector, SpectralError> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (index, (c, m)) in self.coeffs.iter().zip(self.basis.modes()).enumerate() {
            let v = f(m.lambda);
            if !v.is_finite() {
                return Err(SpectralError::NonFiniteCalculus { index, lambda: m.lambda });
            }
            coeffs.push(v * c);
        }
        Ok(SpectralVector {
            basis: Arc::clone(&self.basis),
            coeffs,
        })
    }

    /// `Σ w(λ_j)·u_j²` over the nonzero coefficients.
    pub fn weighted_square(&self, w: impl Fn(f64) -> f64) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.modes())
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, m)| w(m.lambda) * c * c)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `‖(1+L)^{s/2}u‖`.
    pub fn hsl_norm(&self, s: f64) -> f64 {
        self.weighted_square(|l| (1.0 + l).powf(s)).sqrt()
    }

    /// `(Σ e^{2θλ_j^α} u_j²)^{1/2}`, refusing weights beyond `e^{1400}`.
    pub fn gevrey_norm(&self, alpha: f64, theta: f64) -> Result<f64, SpectralError> {
        let lambda_max = self
            .coeffs
            .iter()
            .zip(self.basis.modes())
            .filter(|(c, _)| **c != 0.0)
            .map(|(_, m)| m.lambda)
            .fold(0.0, f64::max);
        if theta * lambda_max.powf(alpha) > GEVREY_EXPONENT_LIMIT {
            return Err(SpectralError::GevreyOverflow { lambda_max });
        }
        Ok(self.weighted_square(|l| (2.0 * theta * l.powf(alpha)).exp()).sqrt())
    }

    /// `Λ_σ(u) = ‖u‖_{H^σ_L} / ‖u‖`.
    pub fn frequency_function(&self, sigma: f64) -> Result<f64, SpectralError> {
        let n0 = self.hsl_norm(0.0);
        if n0 == 0.0 {
            return Err(SpectralError::ZeroVector);
        }
        Ok(self.hsl_norm(sigma) / n0)
    }

    /// Both sides of `G(‖u‖²_F/‖u‖²)·‖u‖ ≤ ‖G(F(L))u‖`, valid when `G²` is convex.
    pub fn jensen_check(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<(f64, f64), SpectralError> {
        let n2 = self.weighted_square(|_| 1.0);
        if n2 == 0.0 {
            return Err(SpectralError::ZeroVector);
        }
        let mean = self.weighted_square(&f) / n2;
        let lhs = g(mean) * n2.sqrt();
        let rhs = self.weighted_square(|l| g(f(l)).powi(2)).sqrt();
        Ok((lhs, rhs))
    }

    pub fn add_scaled(&self, a: f64, other: &SpectralVector) -> Result<SpectralVector, SpectralError> {
        if !self.same_basis(other) {
            return Err(SpectralError::BasisMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect();
        SpectralVector::new(Arc::clone(&self.basis), coeffs)
    }

    /// Point values of `Σ u_j φ_j` on the tensor grid `linspace(−1,1,nx1) × linspace(0,1,nx2)`.
    pub fn sample_on_grid(&self, nx1: usize, nx2: usize) -> Result<GridSample, SpectralError> {
        if nx1 < 2 || nx2 < 2 {
            return Err(SpectralError::InvalidSpec {
                field: "grid",
                reason: format!("sampling grid must be at least 2×2, got {nx1}×{nx2}"),
            });
        }
        let x1: Vec<f64> = (0..nx1).map(|i| -1.0 + 2.0 * i as f64 / (nx1 - 1) as f64).collect();
        let x2: Vec<f64> = (0..nx2).map(|i| i as f64 / (nx2 - 1) as f64).collect();
        let mut values = vec![0.0; nx1 * nx2];
        let h = self.basis.grid_h();
        let mut col = vec![0.0; nx1];
        let mut row = vec![0.0; nx2];
        for (c, m) in self.coeffs.iter().zip(self.basis.modes()) {
            if *c == 0.0 {
                continue;
            }
            for (v, &x) in col.iter_mut().zip(&x1) {
                *v = c * interpolate(&m.profile, h, x);
            }
            for (v, &y) in row.iter_mut().zip(&x2) {
                *v = m.x2.value(y);
            }
            for (i, a) in col.iter().enumerate() {
                for (out, b) in values[i * nx2..(i + 1) * nx2].iter_mut().zip(&row) {
                    *out += a * b;
                }
            }
        }
        Ok(GridSample { x1, x2, values })
    }
}

/// Values on a tensor grid, row-major in `x₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridSample {
    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.x2.len() + i2]
    }

    /// Trapezoid `L²` norm over the sampled rectangle.
    pub fn l2_norm(&self) -> f64 {
        let w = |i: usize, n: usize, len: f64| {
            let h = len / (n - 1) as f64;
            if i == 0 || i == n - 1 {
                0.5 * h
            } else {
                h
            }
        };
        let (n1, n2) = (self.x1.len(), self.x2.len());
        let l1 = self.x1[n1 - 1] - self.x1[0];
        let l2 = self.x2[n2 - 1] - self.x2[0];
        let mut s = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                s += w(i, n1, l1) * w(j, n2, l2) * self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    /// Heatmap CSV with header `x1,x2,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2,value\n");
        for (i, a) in self.x1.iter().enumerate() {
            for (j, b) in self.x2.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", g17(*a), g17(*b), g17(self.get(i, j)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn basis() -> Arc<SpectralBasis> {
        static B: OnceLock<Arc<SpectralBasis>> = OnceLock::new();
        B.get_or_init(|| Arc::new(build_basis(&OperatorSpec::grushin(1, 513, 10, 4)).unwrap()))
            .clone()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn calculus_basics() {
        let b = basis();
        let u = SpectralVector::random(b.clone(), &mut rng(), f64::INFINITY);
        assert_eq!(u.apply_calculus(|_| 1.0).unwrap(), u);
        let e = SpectralVector::unit(b.clone(), 3);
        let le = e.apply_calculus(|l| l).unwrap();
        assert_eq!(le.coeffs()[3], b.modes()[3].lambda);
        let t = 1e-3;
        let back = u
            .apply_calculus(|l| (-t * l).exp())
            .unwrap()
            .apply_calculus(|l| (t * l).exp())
            .unwrap();
        for (a, c) in back.coeffs().iter().zip(u.coeffs()) {
            assert!((a - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
        let fg = u.apply_calculus(|l| l.sqrt() * (1.0 + l)).unwrap();
        let f_then_g = u.apply_calculus(f64::sqrt).unwrap().apply_calculus(|l| 1.0 + l).unwrap();
        for (a, c) in fg.coeffs().iter().zip(f_then_g.coeffs()) {
            assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert!(matches!(
            u.apply_calculus(|l| 1.0 / (l - b.modes()[2].lambda)),
            Err(SpectralError::NonFiniteCalculus { index: 2, .. })
        ));
    }

    #[test]
    fn norms() {
        let b = basis();
        let mut r = rng();
        let u = SpectralVector::random(b.clone(), &mut r, f64::INFINITY);
        assert!((u.hsl_norm(0.0) - u.l2_norm()).abs() < 1e-14 * u.l2_norm());
        let e = SpectralVector::unit(b.clone(), 5).apply_calculus(|_| -2.0).unwrap();
        let l5 = b.modes()[5].lambda;
        assert!((e.hsl_norm(2.0) - 2.0 * (1.0 + l5)).abs() < 1e-12 * l5);
        for _ in 0..50 {
            let u = SpectralVector::random(b.clone(), &mut r, f64::INFINITY);
            assert!(u.hsl_norm(1.0).powi(2) <= u.hsl_norm(0.0) * u.hsl_norm(2.0) * (1.0 + 1e-14));
        }
        assert!((u.gevrey_norm(1.0, 0.0).unwrap() - u.hsl_norm(0.0)).abs() < 1e-14 * u.l2_norm());
        let t = 0.05;
        let g = SpectralVector::unit(b.clone(), 5).gevrey_norm(1.0, t).unwrap();
        assert!((g / (t * l5).exp() - 1.0).abs() < 1e-14);
        let big_t = 300.0 / b.modes().last().unwrap().lambda;
        let heat = u.apply_calculus(|l| (-big_t * l).exp()).unwrap();
        let gn = heat.gevrey_norm(1.0, big_t).unwrap();
        assert!((gn / u.l2_norm() - 1.0).abs() < 1e-12);
        assert!(matches!(u.gevrey_norm(1.0, 10.0), Err(SpectralError::GevreyOverflow { .. })));
    }

    #[test]
    fn frequency_function_inequalities() {
        let b = basis();
        let mut r = rng();
        let e = SpectralVector::unit(b.clone(), 4);
        let l4 = b.modes()[4].lambda;
        assert!((e.frequency_function(1.5).unwrap() - (1.0 + l4).powf(0.75)).abs() < 1e-12 * l4);
        assert!(matches!(
            SpectralVector::zeros(b.clone()).frequency_function(1.0),
            Err(SpectralError::ZeroVector)
        ));
        for _ in 0..10_000 {
            let u = SpectralVector::random(b.clone(), &mut r, f64::INFINITY);
            let hu = u.apply_calculus(|l| 1.0 / (1.0 + l)).unwrap();
            let sigma = 1.0;
            assert!(hu.frequency_function(sigma).unwrap() <= 2.0 * u.frequency_function(sigma).unwrap());
            let fu = u.apply_calculus(|l| (1.0 + l).sqrt()).unwrap();
            let gu = u.apply_calculus(|l| 1.0 + l).unwrap();
            let fgu = u.apply_calculus(|l| (1.0 + l).powf(1.5)).unwrap();
            assert!(fu.l2_norm() * gu.l2_norm() <= 2.0 * fgu.l2_norm() * u.l2_norm());
        }
    }

    #[test]
    fn jensen() {
        let b = basis();
        let mut r = rng();
        let (lhs, rhs) = SpectralVector::unit(b.clone(), 7)
            .jensen_check(|s| s + 1.0, |s| 1.0 / s.sqrt())
            .unwrap();
        assert!((lhs - rhs).abs() <= 1e-15 * rhs);
        let alpha = 0.5;
        for _ in 0..200 {
            let u = SpectralVector::random(b.clone(), &mut r, f64::INFINITY);
            let (lhs, rhs) = u.jensen_check(|s| s + 1.0, |s| 1.0 / s.sqrt()).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-14));
            let ratio_low = u.l2_norm() / u.hsl_norm(-1.0);
            let ratio_high = u.hsl_norm(1.0) / u.l2_norm();
            assert!(ratio_low <= ratio_high * (1.0 + 1e-14));
            let (lhs, rhs) = u.jensen_check(|s| s, |s| (-3.0 * (alpha * s).sqrt()).exp()).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-14));
        }
    }

    #[test]
    fn sampling() {
        let b = basis();
        let j = b.ground_mode(1).unwrap();
        let s = SpectralVector::unit(b.clone(), j).sample_on_grid(33, 17).unwrap();
        assert!((0..33).all(|i| s.get(i, 0).abs() < 1e-14));
        let z = SpectralVector::zeros(b.clone()).sample_on_grid(5, 5).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        let mut coeffs = vec![0.0; b.len()];
        let mut r = rng();
        for c in coeffs.iter_mut().take(10) {
            *c = r.sample(StandardNormal);
        }
        let u = SpectralVector::new(b.clone(), coeffs).unwrap();
        let g = u.sample_on_grid(512, 512).unwrap();
        assert!((g.l2_norm() / u.l2_norm() - 1.0).abs() < 0.01);
        assert!(u.sample_on_grid(1, 4).is_err());
        assert!(g.to_csv().starts_with("x1,x2,value\n-1,0,"));
    }

    #[test]
    fn constructor_checks() {
        let b = basis();
        assert!(SpectralVector::new(b.clone(), vec![0.0; 3]).is_err());
        let mut c = vec![0.0; b.len()];
        c[0] = f64::NAN;
        assert!(SpectralVector::new(b, c).is_err());
    }
}
