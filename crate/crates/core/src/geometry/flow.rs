use super::{hamiltonian, CotangentState, GeometryError, SrSystem};
use crate::numerics::{integrate_ode, jacobi_eigen, NumericsError, OdeMethod, SymMatrix};
use crate::textfmt::g17;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub state: CotangentState,
}

/// Samples of a Hamiltonian trajectory `s ↦ (x(s), ξ(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    pub ell0: f64,
}

impl GeodesicPath {
    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("paths are never empty")
    }

    pub fn max_hamiltonian_drift(&self, sys: &SrSystem) -> f64 {
        self.samples
            .iter()
            .map(|p| (hamiltonian(sys, &p.state) - self.ell0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `s, x1..xd, xi1..xid, ell`.
    pub fn to_csv(&self, sys: &SrSystem) -> String {
        let d = sys.dim();
        let mut out = String::from("s");
        for i in 1..=d {
            let _ = write!(out, ",x{i}");
        }
        for i in 1..=d {
            let _ = write!(out, ",xi{i}");
        }
        out.push_str(",ell\n");
        for p in &self.samples {
            out.push_str(&g17(p.s));
            for v in p.state.x.iter().chain(&p.state.xi) {
                out.push(',');
                out.push_str(&g17(*v));
            }
            let _ = writeln!(out, ",{}", g17(hamiltonian(sys, &p.state)));
        }
        out
    }
}

/// Right-hand side of the Hamiltonian system of `ℓ` on `y = (x, ξ)`:
/// `ẋ = Σ 2⟨ξ,X_i⟩X_i`, `ξ̇ = −Σ 2⟨ξ,X_i⟩ DX_iᵀξ`.
pub(crate) fn hamiltonian_rhs(sys: &SrSystem) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    let d = sys.dim();
    move |_s, y, dy| {
        let (x, xi) = y.split_at(d);
        dy.fill(0.0);
        let mut f = vec![0.0; d];
        let mut jac = vec![0.0; d * d];
        for i in 0..sys.field_count() {
            sys.field(i, x, &mut f);
            let p: f64 = f.iter().zip(xi).map(|(a, b)| a * b).sum();
            if p == 0.0 {
                continue;
            }
            sys.field_jacobian(i, x, &mut jac);
            for a in 0..d {
                dy[a] += 2.0 * p * f[a];
            }
            for b in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    s += xi[a] * jac[a * d + b];
                }
                dy[d + b] -= 2.0 * p * s;
            }
        }
    }
}

/// Horizontal velocity `Σ 2⟨ξ,X_i⟩X_i` at a cotangent state.
pub fn velocity(sys: &SrSystem, st: &CotangentState) -> Vec<f64> {
    let d = sys.dim();
    let mut v = vec![0.0; d];
    let mut f = vec![0.0; d];
    for (i, p) in sys.pairings(&st.x, &st.xi).into_iter().enumerate() {
        sys.field(i, &st.x, &mut f);
        for a in 0..d {
            v[a] += 2.0 * p * f[a];
        }
    }
    v
}

/// RK4 trajectory of the Hamiltonian flow over `[0, s_total]`.
pub fn flow_geodesic(sys: &SrSystem, st0: &CotangentState, s_total: f64, step: f64) -> Result<GeodesicPath, GeometryError> {
    let d = sys.dim();
    if st0.x.len() != d || st0.xi.len() != d {
        return Err(GeometryError::InvalidInput(format!("state dimension must be {d}")));
    }
    let y0: Vec<f64> = st0.x.iter().chain(&st0.xi).copied().collect();
    let traj = integrate_ode(hamiltonian_rhs(sys), &y0, (0.0, s_total), step, OdeMethod::Rk4).map_err(|e| match e {
        NumericsError::NonFiniteState { s } => GeometryError::NonFinite { s },
        other => GeometryError::Numerics(other),
    })?;
    let samples = traj
        .s
        .into_iter()
        .zip(traj.states)
        .map(|(s, y)| PathSample {
            s,
            state: CotangentState {
                x: y[..d].to_vec(),
                xi: y[d..].to_vec(),
            },
        })
        .collect();
    Ok(GeodesicPath {
        samples,
        ell0: hamiltonian(sys, st0),
    })
}

/// Least-norm controls `u` with `Σ u_i X_i(x) = v`, or `None` when `v` is not
/// in the span of the frame (relative residual above 1e-10).
pub fn sr_metric_control(sys: &SrSystem, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
    let d = sys.dim();
    let m = sys.field_count();
    let mut frame = vec![vec![0.0; d]; m];
    for (i, f) in frame.iter_mut().enumerate() {
        sys.field(i, x, f);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let gram = SymMatrix::from_fn(m, |i, j| dot(&frame[i], &frame[j]));
    let (mu, vecs) = jacobi_eigen(&gram, true).ok()?;
    let vecs = vecs?;
    let atv: Vec<f64> = frame.iter().map(|f| dot(f, v)).collect();
    let mu_max = mu.iter().cloned().fold(0.0, f64::max);
    let mut u = vec![0.0; m];
    for (k, &mk) in mu.iter().enumerate() {
        if mk <= mu_max * 1e-24 || mk <= 0.0 {
            continue;
        }
        let c: f64 = (0..m).map(|r| vecs[r * m + k] * atv[r]).sum::<f64>() / mk;
        for r in 0..m {
            u[r] += c * vecs[r * m + k];
        }
    }
    let vnorm = dot(v, v).sqrt();
    let mut res = 0.0;
    for a in 0..d {
        let au: f64 = (0..m).map(|i| u[i] * frame[i][a]).sum();
        res += (au - v[a]).powi(2);
    }
    (res.sqrt() <= 1e-10 * vnorm.max(1.0)).then_some(u)
}

/// `g(x, v) = min{Σu_i² : Σu_i X_i(x) = v}`, `+∞` off the horizontal span.
pub fn sr_metric(sys: &SrSystem, x: &[f64], v: &[f64]) -> f64 {
    match sr_metric_control(sys, x, v) {
        Some(u) => u.iter().map(|c| c * c).sum(),
        None => f64::INFINITY,
    }
}

/// Trapezoid rule for `∫ √g(x, ẋ) ds` along the sampled path.
pub fn path_length(sys: &SrSystem, path: &GeodesicPath) -> Result<f64, GeometryError> {
    let mut speeds = Vec::with_capacity(path.samples.len());
    for p in &path.samples {
        let g = sr_metric(sys, &p.state.x, &velocity(sys, &p.state));
        if !g.is_finite() {
            return Err(GeometryError::NotHorizontal { s: p.s });
        }
        speeds.push(g.sqrt());
    }
    Ok(path
        .samples
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(p, v)| 0.5 * (p[1].s - p[0].s) * (v[0] + v[1]))
        .sum())
}
