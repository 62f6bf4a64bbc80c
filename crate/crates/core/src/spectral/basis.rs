use super::{Family, OperatorSpec, SpectralError};
use crate::numerics::{eigen_tridiag, eigenvalues_tridiag, NumericsError, TridiagonalSymmetric};
use rayon::prelude::*;
use std::f64::consts::SQRT_2;

/// The `x₂` factor of a 2D eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum X2Mode {
    /// `√2·sin(ω x₂)`
    Sine(f64),
    /// `√2·cos(ω x₂)`
    Cosine(f64),
    Constant,
}

impl X2Mode {
    pub fn value(self, x2: f64) -> f64 {
        match self {
            X2Mode::Sine(w) => SQRT_2 * (w * x2).sin(),
            X2Mode::Cosine(w) => SQRT_2 * (w * x2).cos(),
            X2Mode::Constant => 1.0,
        }
    }

    pub fn frequency(self) -> f64 {
        match self {
            X2Mode::Sine(w) | X2Mode::Cosine(w) => w,
            X2Mode::Constant => 0.0,
        }
    }
}

/// `∫_c^d cos(kx) dx` and `∫_c^d sin(kx) dx`, written with `sinc` so that small
/// `k` does not cancel.
pub(crate) fn trig_integrals(k: f64, c: f64, d: f64) -> (f64, f64) {
    let m = 0.5 * (c + d);
    let w = 0.5 * (d - c);
    let kw = k * w;
    let sinc = if kw.abs() < 1e-8 { 1.0 - kw * kw / 6.0 } else { kw.sin() / kw };
    let len = d - c;
    (len * (k * m).cos() * sinc, len * (k * m).sin() * sinc)
}

/// Exact `∫_c^d a(x₂)·b(x₂) dx₂`.
pub fn x2_overlap(a: X2Mode, b: X2Mode, c: f64, d: f64) -> f64 {
    use X2Mode::*;
    match (a, b) {
        (Constant, Constant) => d - c,
        (Constant, Sine(w)) | (Sine(w), Constant) => SQRT_2 * trig_integrals(w, c, d).1,
        (Constant, Cosine(w)) | (Cosine(w), Constant) => SQRT_2 * trig_integrals(w, c, d).0,
        (Sine(p), Sine(q)) => trig_integrals(p - q, c, d).0 - trig_integrals(p + q, c, d).0,
        (Cosine(p), Cosine(q)) => trig_integrals(p - q, c, d).0 + trig_integrals(p + q, c, d).0,
        (Sine(p), Cosine(q)) | (Cosine(q), Sine(p)) => {
            trig_integrals(p + q, c, d).1 + trig_integrals(p - q, c, d).1
        }
    }
}

/// One eigenfunction `√2·v(x₁)·X(x₂)` (or `v(x₁)` for the constant `x₂` mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub fourier_n: i64,
    /// 1-based index among the eigenvalues of the 1D operator for `|n|`.
    pub branch: usize,
    pub lambda: f64,
    pub x2: X2Mode,
    /// `v` at the `grid_n` nodes of `[−1,1]`, trapezoid-normalized.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    spec: OperatorSpec,
    modes: Vec<Mode>,
}

impl SpectralBasis {
    /// Assembles a basis from already computed modes; they are re-sorted.
    pub fn from_modes(spec: OperatorSpec, mut modes: Vec<Mode>) -> Result<Self, SpectralError> {
        spec.validate()?;
        for m in &modes {
            if m.profile.len() != spec.grid_n {
                return Err(SpectralError::Length {
                    expected: spec.grid_n,
                    got: m.profile.len(),
                });
            }
        }
        sort_modes(&mut modes);
        Ok(SpectralBasis { spec, modes })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn grid_h(&self) -> f64 {
        2.0 / (self.spec.grid_n - 1) as f64
    }

    pub fn x1_node(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.grid_h()
    }

    /// Linear interpolation of mode `j`'s profile at `x₁ ∈ [−1, 1]`.
    pub fn profile_at(&self, j: usize, x1: f64) -> f64 {
        interpolate(&self.modes[j].profile, self.grid_h(), x1)
    }

    /// Ground mode (branch 1) for Fourier index `n`, if retained.
    pub fn ground_mode(&self, n: i64) -> Option<usize> {
        self.modes.iter().position(|m| m.fourier_n == n && m.branch == 1)
    }
}

pub(crate) fn interpolate(profile: &[f64], h: f64, x1: f64) -> f64 {
    let last = profile.len() - 1;
    let s = ((x1 + 1.0) / h).clamp(0.0, last as f64);
    let i = (s.floor() as usize).min(last - 1);
    let t = s - i as f64;
    profile[i] * (1.0 - t) + profile[i + 1] * t
}

fn sort_modes(modes: &mut [Mode]) {
    modes.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then(a.fourier_n.cmp(&b.fourier_n))
            .then(a.branch.cmp(&b.branch))
    });
}

/// Second-order finite-difference matrix of `−f″ + (ω_n)²V f` on the interior
/// nodes of a uniform `grid_n`-point grid of `[−1,1]` (Dirichlet rows removed).
pub fn one_dim_operator(spec: &OperatorSpec, n: i64, grid_n: usize) -> Result<TridiagonalSymmetric, SpectralError> {
    if spec.family == Family::GrushinTorus {
        return Err(SpectralError::InvalidSpec {
            field: "family",
            reason: "the torus operator is assembled per parity".into(),
        });
    }
    let h = 2.0 / (grid_n - 1) as f64;
    let w = spec.fourier_weight(n);
    let inner = grid_n - 2;
    let diag = (1..=inner)
        .map(|i| 2.0 / (h * h) + w * spec.potential(-1.0 + i as f64 * h))
        .collect();
    tridiag(diag, vec![-1.0 / (h * h); inner - 1])
}

fn tridiag(diag: Vec<f64>, off: Vec<f64>) -> Result<TridiagonalSymmetric, SpectralError> {
    TridiagonalSymmetric::new(diag, off).map_err(|source| SpectralError::Eigen { n: 0, branch: 0, source })
}

/// Even (Neumann) and odd (Dirichlet) halves of the periodic torus operator
/// on `[0,1]`. The Neumann matrix is symmetrized with trapezoid weights.
fn torus_operators(spec: &OperatorSpec, n: i64, grid_n: usize) -> Result<[TridiagonalSymmetric; 2], SpectralError> {
    let m = (grid_n - 1) / 2;
    let h = 1.0 / m as f64;
    let w = spec.fourier_weight(n);
    let d = |j: usize| 2.0 / (h * h) + w * spec.potential(j as f64 * h);
    let even_diag = (0..=m).map(d).collect();
    let mut even_off = vec![-1.0 / (h * h); m];
    even_off[0] = -SQRT_2 / (h * h);
    even_off[m - 1] = -SQRT_2 / (h * h);
    let odd_diag = (1..m).map(d).collect();
    Ok([tridiag(even_diag, even_off)?, tridiag(odd_diag, vec![-1.0 / (h * h); m - 2])?])
}

struct Branch {
    lambda: f64,
    profile: Vec<f64>,
}

fn richardson(fine: f64, coarse: f64) -> f64 {
    ((4.0 * fine - coarse) / 3.0).max(0.0)
}

fn eigen_err(n: i64) -> impl Fn(NumericsError) -> SpectralError {
    move |source| {
        let branch = match source {
            NumericsError::EigenNoConvergence { index } => index + 1,
            _ => 0,
        };
        SpectralError::Eigen { n, branch, source }
    }
}

fn rectangle_branches(spec: &OperatorSpec, n: i64) -> Result<Vec<Branch>, SpectralError> {
    let coarse_n = (spec.grid_n - 1) / 2 + 1;
    let fine = one_dim_operator(spec, n, spec.grid_n)?;
    let coarse = one_dim_operator(spec, n, coarse_n)?;
    let pairs = eigen_tridiag(&fine, spec.branch_max).map_err(eigen_err(n))?;
    let coarse_vals = eigenvalues_tridiag(&coarse, spec.branch_max).map_err(eigen_err(n))?;
    let scale = 1.0 / (2.0 / (spec.grid_n - 1) as f64).sqrt();
    Ok(pairs
        .into_iter()
        .zip(coarse_vals)
        .map(|(p, c)| {
            let mut profile = Vec::with_capacity(spec.grid_n);
            profile.push(0.0);
            profile.extend(p.vector.iter().map(|v| v * scale));
            profile.push(0.0);
            Branch {
                lambda: richardson(p.value, c),
                profile,
            }
        })
        .collect())
}

fn torus_branches(spec: &OperatorSpec, n: i64) -> Result<Vec<Branch>, SpectralError> {
    let coarse_n = (spec.grid_n - 1) / 2 + 1;
    let fine = torus_operators(spec, n, spec.grid_n)?;
    let coarse = torus_operators(spec, n, coarse_n)?;
    let m = (spec.grid_n - 1) / 2;
    let h = 1.0 / m as f64;
    let scale = 1.0 / (2.0 * h).sqrt();
    let mut out = Vec::with_capacity(2 * spec.branch_max);
    for (parity, (f, c)) in fine.iter().zip(&coarse).enumerate() {
        let count = spec.branch_max.min(f.len()).min(c.len());
        let pairs = eigen_tridiag(f, count).map_err(eigen_err(n))?;
        let coarse_vals = eigenvalues_tridiag(c, count).map_err(eigen_err(n))?;
        for (b, (p, cv)) in pairs.into_iter().zip(coarse_vals).enumerate() {
            if n == 0 && parity == 0 && b == 0 {
                // Neumann kernel: the constants, exactly
                out.push(Branch {
                    lambda: 0.0,
                    profile: vec![std::f64::consts::FRAC_1_SQRT_2; spec.grid_n],
                });
                continue;
            }
            // half-line values f_j at x = j·h, j = 0..=m
            let half: Vec<f64> = if parity == 0 {
                p.vector
                    .iter()
                    .enumerate()
                    .map(|(j, y)| {
                        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                        y / f64::sqrt(w) * scale
                    })
                    .collect()
            } else {
                let mut v = vec![0.0; m + 1];
                for (j, y) in p.vector.iter().enumerate() {
                    v[j + 1] = y * scale;
                }
                v
            };
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            let profile = (0..spec.grid_n)
                .map(|i| if i >= m { half[i - m] } else { sign * half[m - i] })
                .collect();
            out.push(Branch {
                lambda: richardson(p.value, cv),
                profile,
            });
        }
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    out.truncate(spec.branch_max);
    Ok(out)
}

/// Computes all retained eigenpairs, in parallel over Fourier indices.
pub fn build_basis(spec: &OperatorSpec) -> Result<SpectralBasis, SpectralError> {
    spec.validate()?;
    let first = if spec.family == Family::GrushinTorus { 0 } else { 1 };
    let levels: Vec<i64> = (first..=spec.fourier_max as i64).collect();
    build_levels(spec, &levels)
}

/// Eigenpairs for the listed Fourier levels `|n| ≤ fourier_max` only. The
/// result is a sparse sample of the truncation, not a complete one.
pub fn build_basis_for(spec: &OperatorSpec, levels: &[u64]) -> Result<SpectralBasis, SpectralError> {
    spec.validate()?;
    let torus = spec.family == Family::GrushinTorus;
    let mut levels: Vec<i64> = levels.iter().map(|&n| n as i64).collect();
    levels.sort_unstable();
    levels.dedup();
    if let Some(&bad) = levels.iter().find(|&&n| n > spec.fourier_max as i64 || (n == 0 && !torus)) {
        return Err(SpectralError::InvalidSpec {
            field: "fourier_max",
            reason: format!("level {bad} outside the truncation"),
        });
    }
    build_levels(spec, &levels)
}

fn build_levels(spec: &OperatorSpec, levels: &[i64]) -> Result<SpectralBasis, SpectralError> {
    let torus = spec.family == Family::GrushinTorus;
    let per_n: Vec<Vec<Mode>> = levels
        .par_iter()
        .map(|&n| {
            let branches = if torus { torus_branches(spec, n)? } else { rectangle_branches(spec, n)? };
            let w = spec.x2_frequency(n);
            let x2s: Vec<(i64, X2Mode)> = match (torus, n) {
                (true, 0) => vec![(0, X2Mode::Constant)],
                (true, _) => vec![(n, X2Mode::Cosine(w)), (-n, X2Mode::Sine(w))],
                (false, _) => vec![(n, X2Mode::Sine(w))],
            };
            let mut modes = Vec::new();
            for (b, br) in branches.into_iter().enumerate() {
                if spec.lambda_cutoff.is_some_and(|c| br.lambda > c) {
                    continue;
                }
                for &(fourier_n, x2) in &x2s {
                    modes.push(Mode {
                        fourier_n,
                        branch: b + 1,
                        lambda: br.lambda,
                        x2,
                        profile: br.profile.clone(),
                    });
                }
            }
            Ok(modes)
        })
        .collect::<Result<_, SpectralError>>()?;
    let mut modes: Vec<Mode> = per_n.into_iter().flatten().collect();
    sort_modes(&mut modes);
    Ok(SpectralBasis { spec: spec.clone(), modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fit_loglinear;
    use std::f64::consts::PI;

    fn trapezoid(v: &[f64], h: f64) -> f64 {
        let n = v.len();
        h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
    }

    #[test]
    fn elliptic_closed_form() {
        let spec = OperatorSpec {
            family: Family::Elliptic,
            ..OperatorSpec::grushin(0, 1025, 3, 3)
        };
        let basis = build_basis(&spec).unwrap();
        assert_eq!(basis.len(), 9);
        for m in basis.modes() {
            let exact = (m.branch as f64 * PI / 2.0).powi(2) + (m.fourier_n as f64 * PI).powi(2);
            assert!((m.lambda / exact - 1.0).abs() < 1e-6, "{} vs {}", m.lambda, exact);
        }
        assert!((basis.modes()[0].lambda - (PI * PI / 4.0 + PI * PI)).abs() < 1e-5);
    }

    #[test]
    fn harmonic_regime_for_gamma_one() {
        let spec = OperatorSpec::grushin(1, 2049, 40, 1);
        let basis = build_basis(&spec).unwrap();
        let j = basis.ground_mode(40).unwrap();
        let r = basis.modes()[j].lambda / (40.0 * PI);
        assert!((0.99..=1.01).contains(&r), "{r}");
    }

    #[test]
    fn growth_exponent_gamma_two() {
        let spec = OperatorSpec::grushin(2, 2049, 100, 1);
        let basis = build_basis(&spec).unwrap();
        let ns: Vec<f64> = (10..=100).map(f64::from).collect();
        let ls: Vec<f64> = (10..=100)
            .map(|n| basis.modes()[basis.ground_mode(n).unwrap()].lambda.ln())
            .collect();
        let logn: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
        let fit = fit_loglinear(&logn, &ls).unwrap();
        assert!((fit.slope - 2.0 / 3.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn profiles_normalized_orthogonal_and_ground_positive() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let spec = OperatorSpec {
                family,
                ..OperatorSpec::grushin(1, 1025, 6, 4)
            };
            let basis = build_basis(&spec).unwrap();
            let h = basis.grid_h();
            let modes = basis.modes();
            for (a, ma) in modes.iter().enumerate() {
                assert!(ma.lambda >= 0.0);
                if ma.branch == 1 {
                    assert!(ma.profile.iter().all(|&v| v >= 0.0), "{family:?} n={}", ma.fourier_n);
                }
                for mb in &modes[a..] {
                    if mb.fourier_n != ma.fourier_n {
                        continue;
                    }
                    let prod: Vec<f64> = ma.profile.iter().zip(&mb.profile).map(|(x, y)| x * y).collect();
                    let ip = trapezoid(&prod, h);
                    let expect = if ma.branch == mb.branch { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-8, "{family:?} {ip}");
                }
            }
            let ground: Vec<f64> = (1..=6).map(|n| modes[basis.ground_mode(n).unwrap()].lambda).collect();
            assert!(ground.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn residual_and_grid_stability() {
        let spec = OperatorSpec::grushin(1, 2049, 4, 3);
        let basis = build_basis(&spec).unwrap();
        let h = basis.grid_h();
        for m in basis.modes() {
            let op = one_dim_operator(&spec, m.fourier_n, spec.grid_n).unwrap();
            let v: Vec<f64> = m.profile[1..spec.grid_n - 1].iter().map(|x| x * h.sqrt()).collect();
            let mv = op.apply(&v);
            let rho: f64 = mv.iter().zip(&v).map(|(a, b)| a * b).sum();
            // residual of h²·A, the form in which the stencil entries are O(1)
            let res = mv.iter().zip(&v).map(|(a, b)| (a - rho * b).powi(2)).sum::<f64>().sqrt() * h * h;
            assert!(res <= 1e-10 * (1.0 + rho * h * h), "{res}");
        }
        let half = build_basis(&OperatorSpec { grid_n: 1025, ..spec.clone() }).unwrap();
        for (a, b) in basis.modes().iter().zip(half.modes()) {
            assert_eq!((a.fourier_n, a.branch), (b.fourier_n, b.branch));
            assert!((a.lambda / b.lambda - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn torus_has_zero_mode_and_paired_modes() {
        let spec = OperatorSpec {
            family: Family::GrushinTorus,
            ..OperatorSpec::grushin(1, 257, 2, 2)
        };
        let basis = build_basis(&spec).unwrap();
        assert_eq!(basis.modes()[0].fourier_n, 0);
        assert!(basis.modes()[0].lambda < 1e-10);
        assert!(basis.modes()[0].profile.iter().all(|v| (v - 0.5f64.sqrt()).abs() < 1e-10));
        // n = 0 second branch: sin(πx₁) or cos(πx₁), both λ = π²
        let l: Vec<f64> = basis.modes().iter().filter(|m| m.fourier_n == 0).map(|m| m.lambda).collect();
        assert!((l[1] - PI * PI).abs() < 1e-4);
        assert_eq!(basis.len(), 2 + 4 * 2);
    }

    #[test]
    fn overlap_closed_forms() {
        let s = X2Mode::Sine(PI);
        let s2 = X2Mode::Sine(2.0 * PI);
        assert!((x2_overlap(s, s, 0.0, 1.0) - 1.0).abs() < 1e-14);
        assert!(x2_overlap(s, s2, 0.0, 1.0).abs() < 1e-14);
        let c = X2Mode::Cosine(2.0 * PI);
        assert!((x2_overlap(c, c, 0.0, 1.0) - 1.0).abs() < 1e-14);
        assert!(x2_overlap(c, X2Mode::Sine(2.0 * PI), 0.0, 1.0).abs() < 1e-14);
        // partial interval against direct quadrature
        let (a, b) = (0.2, 0.7);
        let n = 20000;
        let direct: f64 = (0..n)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * (b - a) / n as f64;
                s.value(x) * c.value(x)
            })
            .sum::<f64>()
            * (b - a)
            / n as f64;
        assert!((x2_overlap(s, c, a, b) - direct).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_basis(&OperatorSpec::grushin(1, 100, 3, 1)).is_err());
        assert!(build_basis(&OperatorSpec::grushin(1, 129, 0, 1)).is_err());
        let e = OperatorSpec {
            family: Family::Elliptic,
            ..OperatorSpec::grushin(1, 129, 3, 1)
        };
        assert!(matches!(build_basis(&e), Err(SpectralError::InvalidSpec { field: "gamma", .. })));
    }

    #[test]
    fn subset_matches_full_build() {
        let spec = OperatorSpec::grushin(1, 257, 12, 2);
        let full = build_basis(&spec).unwrap();
        let part = build_basis_for(&spec, &[3, 11, 3]).unwrap();
        assert_eq!(part.len(), 4);
        for m in part.modes() {
            let j = full.modes().iter().position(|f| f.fourier_n == m.fourier_n && f.branch == m.branch).unwrap();
            assert_eq!(full.modes()[j].lambda, m.lambda);
            assert_eq!(full.modes()[j].profile, m.profile);
        }
        assert!(build_basis_for(&spec, &[13]).is_err());
        assert!(build_basis_for(&spec, &[0]).is_err());
    }
}
