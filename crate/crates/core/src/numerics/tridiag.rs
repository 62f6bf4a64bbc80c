use super::NumericsError;

/// Matrices up to this size are diagonalized with implicit QL plus accumulated
/// rotations; larger ones use Sturm bisection and inverse iteration on the
/// requested eigenvalues only.
const DENSE_QL_LIMIT: usize = 512;
const QL_MAX_ITER: usize = 60;

/// Real symmetric tridiagonal matrix stored as its diagonal and sub-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSymmetric {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

impl TridiagonalSymmetric {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self, NumericsError> {
        if diag.len() < 2 {
            return Err(NumericsError::InvalidInput(format!(
                "tridiagonal size must be at least 2, got {}",
                diag.len()
            )));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(NumericsError::InvalidInput(format!(
                "off-diagonal length {} does not match diagonal length {}",
                offdiag.len(),
                diag.len()
            )));
        }
        if let Some(i) = diag.iter().chain(offdiag.iter()).position(|v| !v.is_finite()) {
            return Err(NumericsError::InvalidInput(format!(
                "non-finite tridiagonal entry at flat index {i}"
            )));
        }
        Ok(TridiagonalSymmetric { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.offdiag[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Infinity norm, used as the scale for pivot guards.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.offdiag[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.offdiag[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.offdiag[i - 1].abs();
            }
            if i + 1 < n {
                r += self.offdiag[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly less than `x` (Sturm sequence via LDLᵀ pivots).
    pub fn sturm_count(&self, x: f64) -> usize {
        let guard = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0.. {
            if q == 0.0 {
                q = -guard;
            }
            if q < 0.0 {
                count += 1;
            }
            if i + 1 == self.len() {
                break;
            }
            let e = self.offdiag[i];
            q = self.diag[i + 1] - x - e * e / q;
        }
        count
    }

    /// Residual ‖M v − λ v‖₂ of an eigenpair.
    pub fn residual(&self, pair: &EigenPair) -> f64 {
        self.apply(&pair.vector)
            .iter()
            .zip(&pair.vector)
            .map(|(mv, v)| (mv - pair.value * v).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Lowest `count` eigenpairs of `m`, sorted ascending, with unit-norm eigenvectors.
pub fn eigen_tridiag(m: &TridiagonalSymmetric, count: usize) -> Result<Vec<EigenPair>, NumericsError> {
    check_count(m, count)?;
    // QL accumulates all n vectors; worth it only when most of them are wanted
    if m.len() <= DENSE_QL_LIMIT && 4 * count >= m.len() {
        match ql_implicit(m, true) {
            Ok((values, vectors)) => {
                let n = m.len();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                return Ok(order
                    .into_iter()
                    .take(count)
                    .map(|j| EigenPair {
                        value: values[j],
                        vector: (0..n).map(|k| vectors[k * n + j]).collect(),
                    })
                    .collect());
            }
            Err(NumericsError::EigenNoConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let values = bisection_lowest(m, count);
    inverse_iteration(m, &values)
}

/// Lowest `count` eigenvalues only.
pub fn eigenvalues_tridiag(m: &TridiagonalSymmetric, count: usize) -> Result<Vec<f64>, NumericsError> {
    check_count(m, count)?;
    if m.len() <= DENSE_QL_LIMIT {
        if let Ok((mut values, _)) = ql_implicit(m, false) {
            values.sort_by(f64::total_cmp);
            values.truncate(count);
            return Ok(values);
        }
    }
    Ok(bisection_lowest(m, count))
}

fn check_count(m: &TridiagonalSymmetric, count: usize) -> Result<(), NumericsError> {
    if count == 0 || count > m.len() {
        return Err(NumericsError::InvalidInput(format!(
            "eigenpair count {count} outside [1, {}]",
            m.len()
        )));
    }
    Ok(())
}

/// Implicit-shift QL (tql2). Returns eigenvalues (unsorted) and, when requested,
/// the row-major matrix whose column j is the eigenvector of value j.
fn ql_implicit(m: &TridiagonalSymmetric, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    let n = m.len();
    let mut d = m.diag.clone();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&m.offdiag);
    let mut z = if want_vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    } else {
        Vec::new()
    };

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(NumericsError::EigenNoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut deflated = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if want_vectors {
                    for k in 0..n {
                        let zf = z[k * n + i + 1];
                        let zi = z[k * n + i];
                        z[k * n + i + 1] = s * zi + c * zf;
                        z[k * n + i] = c * zi - s * zf;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok((d, z))
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
pub(crate) fn bisect_eigenvalue(m: &TridiagonalSymmetric, k: usize, bounds: (f64, f64)) -> f64 {
    let (mut lo, mut hi) = bounds;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        if m.sturm_count(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn bisection_lowest(m: &TridiagonalSymmetric, count: usize) -> Vec<f64> {
    let (glo, ghi) = m.gershgorin();
    let pad = f64::EPSILON * m.norm_inf() * m.len() as f64 + f64::MIN_POSITIVE;
    let bounds = (glo - pad, ghi + pad);
    (0..count).map(|k| bisect_eigenvalue(m, k, bounds)).collect()
}

/// Eigenvectors for given (ascending) eigenvalues by shifted inverse iteration,
/// reorthogonalizing within clusters.
fn inverse_iteration(m: &TridiagonalSymmetric, values: &[f64]) -> Result<Vec<EigenPair>, NumericsError> {
    let n = m.len();
    let norm = m.norm_inf().max(f64::MIN_POSITIVE);
    let cluster_gap = 1e-3 * norm;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    for (idx, &lambda) in values.iter().enumerate() {
        if idx > 0 && lambda - values[idx - 1] > cluster_gap {
            cluster_start = idx;
        }
        let lu = ShiftedLu::factor(m, lambda, norm);
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.25 * ((i as f64 + 1.0) * (0.618_033_988_75 + idx as f64)).sin())
            .collect();
        normalize(&mut x);
        for _ in 0..4 {
            for prev in &pairs[cluster_start..idx] {
                let dot: f64 = prev.vector.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(&prev.vector).for_each(|(xi, pi)| *xi -= dot * pi);
            }
            x = lu.solve(&x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::EigenNoConvergence { index: idx });
            }
            for prev in &pairs[cluster_start..idx] {
                let dot: f64 = prev.vector.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(&prev.vector).for_each(|(xi, pi)| *xi -= dot * pi);
            }
            if normalize(&mut x) == 0.0 {
                return Err(NumericsError::EigenNoConvergence { index: idx });
            }
        }
        // deterministic sign: largest-magnitude component positive
        let imax = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        pairs.push(EigenPair { value: lambda, vector: x });
    }
    Ok(pairs)
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// LU factorization with partial pivoting of T − σI (upper factor has two super-diagonals).
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(m: &TridiagonalSymmetric, shift: f64, norm: f64) -> Self {
        let n = m.len();
        let tiny = f64::EPSILON * norm;
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // current row i holds (a, b, c) at columns (i, i+1, i+2)
        let mut a = m.diag[0] - shift;
        let mut b = if n > 1 { m.offdiag[0] } else { 0.0 };
        let mut c = 0.0;
        for i in 0..n - 1 {
            let sub = m.offdiag[i];
            let next_diag = m.diag[i + 1] - shift;
            let next_sup = if i + 2 < n { m.offdiag[i + 1] } else { 0.0 };
            if sub.abs() > a.abs() {
                // swap rows i and i+1
                swapped[i] = true;
                let l = a / sub;
                mult[i] = l;
                u0[i] = sub;
                u1[i] = next_diag;
                u2[i] = next_sup;
                a = b - l * next_diag;
                b = c - l * next_sup;
                c = 0.0;
            } else {
                if a == 0.0 {
                    a = tiny;
                }
                let l = sub / a;
                mult[i] = l;
                u0[i] = a;
                u1[i] = b;
                u2[i] = c;
                a = next_diag - l * b;
                b = next_sup - l * c;
                c = 0.0;
            }
        }
        if a == 0.0 {
            a = tiny;
        }
        u0[n - 1] = a;
        ShiftedLu { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            if i + 1 < n {
                acc -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc -= self.u2[i] * x[i + 2];
            }
            x[i] = acc / self.u0[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn laplacian(n: usize, h: f64) -> TridiagonalSymmetric {
        TridiagonalSymmetric::new(vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1]).unwrap()
    }

    #[test]
    fn three_point_stencil_spectrum() {
        let m = TridiagonalSymmetric::new(vec![2.0; 3], vec![-1.0; 2]).unwrap();
        let pairs = eigen_tridiag(&m, 3).unwrap();
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (p, e) in pairs.iter().zip(expected) {
            assert!((p.value - e).abs() < 1e-14);
            assert!(m.residual(p) < 1e-13);
        }
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let m = TridiagonalSymmetric::new(vec![3.5; 6], vec![0.0; 5]).unwrap();
        let pairs = eigen_tridiag(&m, 6).unwrap();
        assert!(pairs.iter().all(|p| (p.value - 3.5).abs() < 1e-15));
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = pairs[i].vector.iter().zip(&pairs[j].vector).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dirichlet_ground_state_on_symmetric_interval() {
        // −d²/dx² on [−1,1], 1023 interior nodes
        let n = 1023;
        let h = 2.0 / (n as f64 + 1.0);
        let m = laplacian(n, h);
        let pairs = eigen_tridiag(&m, 2).unwrap();
        let exact = PI * PI / 4.0;
        assert!(((pairs[0].value - exact) / exact).abs() < 1e-5);
        // discrete closed form 4/h² sin²(kπh/4)
        let discrete = 4.0 / (h * h) * (PI * h / 4.0).sin().powi(2);
        assert!((pairs[0].value - discrete).abs() <= 1e-13 * m.norm_inf());
    }

    #[test]
    fn bisection_path_matches_closed_form() {
        let n = 2047;
        let h = 2.0 / (n as f64 + 1.0);
        let m = laplacian(n, h);
        let pairs = eigen_tridiag(&m, 5).unwrap();
        let scale = m.norm_inf();
        for (k, p) in pairs.iter().enumerate() {
            let kk = (k + 1) as f64;
            let discrete = 4.0 / (h * h) * (kk * PI * h / 4.0).sin().powi(2);
            assert!((p.value - discrete).abs() <= 1e-13 * scale, "k={k}");
            assert!(m.residual(p) <= 1e-10 * scale);
        }
        for i in 0..5 {
            for j in 0..i {
                let dot: f64 = pairs[i].vector.iter().zip(&pairs[j].vector).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TridiagonalSymmetric::new(vec![1.0], vec![]).is_err());
        assert!(TridiagonalSymmetric::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(TridiagonalSymmetric::new(vec![1.0, f64::NAN], vec![0.0]).is_err());
        let m = TridiagonalSymmetric::new(vec![1.0, 2.0], vec![0.5]).unwrap();
        assert!(eigen_tridiag(&m, 0).is_err());
        assert!(eigen_tridiag(&m, 3).is_err());
    }
}
