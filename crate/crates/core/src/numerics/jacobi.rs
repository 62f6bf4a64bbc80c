use super::NumericsError;

const MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix, row-major, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Cyclic Jacobi eigendecomposition. Returns ascending eigenvalues and, if
/// requested, eigenvectors as columns of a row-major `n×n` buffer.
///
/// Rotations are skipped only when `|a_pq| ≤ ε·√(|a_pp a_qq|)`, which keeps
/// small eigenvalues of graded positive definite matrices relatively accurate.
pub fn jacobi_eigen(m: &SymMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>), NumericsError> {
    let n = m.n;
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::InvalidInput("non-finite matrix entry".into()));
    }
    let mut a = m.data.clone();
    let mut v = if want_vectors {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Some(v)
    } else {
        None
    };
    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let nrp = c * arp - s * arq;
                    let nrq = s * arp + c * arq;
                    a[r * n + p] = nrp;
                    a[p * n + r] = nrp;
                    a[r * n + q] = nrq;
                    a[q * n + r] = nrq;
                }
                if let Some(v) = v.as_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::EigenNoConvergence { index: 0 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = v.map(|v| {
        let mut out = vec![0.0; n * n];
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                out[r * n + col] = v[r * n + src];
            }
        }
        out
    });
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (vals, vecs) = jacobi_eigen(&m, true).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] - 3.0).abs() < 1e-15);
        let v = vecs.unwrap();
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn graded_matrix_small_eigenvalue_is_relatively_accurate() {
        // D H D with H well conditioned, D spanning 12 orders of magnitude
        let d = [1.0, 1e-3, 1e-6, 1e-9, 1e-12];
        let h = SymMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.1 });
        let g = SymMatrix::from_fn(5, |i, j| d[i] * h.get(i, j) * d[j]);
        let (vals, _) = jacobi_eigen(&g, false).unwrap();
        // smallest eigenvalue ≈ d₄²·(Schur complement) within a few percent
        assert!(vals[0] > 0.0);
        assert!((vals[0] / 1e-24 - 1.0).abs() < 0.05, "{}", vals[0]);
    }

    #[test]
    fn reconstructs_matrix() {
        let m = SymMatrix::from_fn(6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 3.0 } else { 0.0 });
        let (vals, vecs) = jacobi_eigen(&m, true).unwrap();
        let v = vecs.unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let rec: f64 = (0..6).map(|k| v[i * 6 + k] * vals[k] * v[j * 6 + k]).sum();
                assert!((rec - m.get(i, j)).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }
}
