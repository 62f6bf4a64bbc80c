use super::flow::hamiltonian_rhs;
use super::{flow_geodesic, BoxRegion, CotangentState, GeodesicPath, GeometryError, SrSystem};
use crate::numerics::rk4_step;
use rayon::prelude::*;

const ENTRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub shots: usize,
    pub s_max: f64,
    pub step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            shots: 256,
            s_max: 4.0,
            step: 1e-3,
        }
    }
}

/// Radical inverse of `k` in base `b`.
fn radical_inverse(mut k: usize, b: usize) -> f64 {
    let mut inv = 1.0 / b as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % b) as f64 * inv;
        k /= b;
        inv /= b as f64;
    }
    out
}

/// Direction of shot `k` on the unit sphere of `ℝ^d`. The first `2^p` shots in
/// the plane form the uniform angle grid, and every prefix of the sequence is a
/// subset of any longer one.
fn direction(k: usize, d: usize) -> Result<Vec<f64>, GeometryError> {
    use std::f64::consts::TAU;
    match d {
        1 => Ok(vec![if k.is_multiple_of(2) { 1.0 } else { -1.0 }]),
        2 => {
            let t = TAU * radical_inverse(k, 2);
            Ok(vec![t.cos(), t.sin()])
        }
        3 => {
            let z = 1.0 - 2.0 * (radical_inverse(k, 2) + 0.5 / 1024.0).fract();
            let phi = TAU * radical_inverse(k, 3);
            let r = (1.0 - z * z).max(0.0).sqrt();
            Ok(vec![r * phi.cos(), r * phi.sin(), z])
        }
        _ => Err(GeometryError::InvalidInput(format!("shooting supports d ≤ 3, got {d}"))),
    }
}

/// Covector on `{ℓ(x₀, ·) = 1/4}` along direction `dir`, if the form is
/// non-degenerate there.
fn unit_covector(sys: &SrSystem, x0: &[f64], dir: &[f64]) -> Option<Vec<f64>> {
    let l: f64 = sys.pairings(x0, dir).iter().map(|p| p * p).sum();
    (l > 1e-14).then(|| dir.iter().map(|v| v * 0.5 / l.sqrt()).collect())
}

enum ShotOutcome {
    Entered(f64),
    Missed(f64),
}

fn shoot_one(sys: &SrSystem, x0: &[f64], xi0: &[f64], omega: &BoxRegion, opts: &ShootingOptions) -> Result<ShotOutcome, GeometryError> {
    let d = sys.dim();
    let rhs = hamiltonian_rhs(sys);
    let mut y: Vec<f64> = x0.iter().chain(xi0).copied().collect();
    let mut next = vec![0.0; 2 * d];
    let steps = (opts.s_max / opts.step).ceil() as usize;
    let h = opts.s_max / steps as f64;
    let mut closest = omega.gap(x0);
    for k in 0..steps {
        let s = k as f64 * h;
        rk4_step(&rhs, s, &y, h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { s: s + h });
        }
        if omega.contains(&next[..d]) {
            // membership changed inside (s, s + h): bisect on sub-steps from y
            let (mut lo, mut hi) = (0.0, h);
            let mut probe = vec![0.0; 2 * d];
            while hi - lo > ENTRY_TOL {
                let mid = 0.5 * (lo + hi);
                rk4_step(&rhs, s, &y, mid, &mut probe);
                if omega.contains(&probe[..d]) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ShotOutcome::Entered(s + hi));
        }
        closest = closest.min(omega.gap(&next[..d]));
        std::mem::swap(&mut y, &mut next);
    }
    Ok(ShotOutcome::Missed(closest))
}

/// Shooting estimate of `d(x₀, ω)`: the earliest entry time into `ω` among
/// unit-speed normal geodesics from `x₀`, with the witness path. It is an upper
/// bound that can only decrease as `shots` grows.
pub fn distance_to_set(
    sys: &SrSystem,
    x0: &[f64],
    omega: &BoxRegion,
    opts: &ShootingOptions,
) -> Result<(f64, GeodesicPath), GeometryError> {
    let d = sys.dim();
    if x0.len() != d || omega.dim() != d {
        return Err(GeometryError::InvalidInput(format!("points and boxes must have dimension {d}")));
    }
    if opts.shots < 8 || !(opts.s_max > 0.0) || !(opts.step > 0.0) {
        return Err(GeometryError::InvalidInput(
            "shooting needs shots ≥ 8, s_max > 0 and step > 0".into(),
        ));
    }
    if omega.contains(x0) {
        let st = CotangentState::new(x0.to_vec(), vec![0.0; d])?;
        return Ok((
            0.0,
            GeodesicPath {
                samples: vec![super::PathSample { s: 0.0, state: st }],
                ell0: 0.0,
            },
        ));
    }
    let covectors: Vec<Vec<f64>> = (0..opts.shots)
        .map(|k| direction(k, d))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .filter_map(|dir| unit_covector(sys, x0, dir))
        .collect();
    let outcomes: Vec<ShotOutcome> = covectors
        .par_iter()
        .map(|xi| shoot_one(sys, x0, xi, omega, opts))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, usize)> = None;
    let mut closest_gap = f64::INFINITY;
    for (idx, o) in outcomes.iter().enumerate() {
        match *o {
            ShotOutcome::Entered(t) => {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, idx));
                }
            }
            ShotOutcome::Missed(g) => closest_gap = closest_gap.min(g),
        }
    }
    let (t, idx) = best.ok_or(GeometryError::Unreachable {
        shots: opts.shots,
        s_max: opts.s_max,
        closest_gap,
    })?;
    let st0 = CotangentState::new(x0.to_vec(), covectors[idx].clone())?;
    let witness = flow_geodesic(sys, &st0, t, opts.step)?;
    Ok((t, witness))
}

/// `max_x d(x, ω)` over a `grid^d` tensor grid of the domain box.
pub fn min_observation_time(
    sys: &SrSystem,
    domain: &BoxRegion,
    omega: &BoxRegion,
    grid: usize,
    opts: &ShootingOptions,
) -> Result<f64, GeometryError> {
    let d = sys.dim();
    if grid < 4 {
        return Err(GeometryError::InvalidInput(format!("grid must be at least 4, got {grid}")));
    }
    if domain.dim() != d || domain.lo.iter().chain(&domain.hi).any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidInput("domain must be a bounded box of matching dimension".into()));
    }
    let points: Vec<Vec<f64>> = (0..grid.pow(d as u32))
        .map(|mut flat| {
            (0..d)
                .map(|a| {
                    let i = flat % grid;
                    flat /= grid;
                    domain.lo[a] + (domain.hi[a] - domain.lo[a]) * i as f64 / (grid - 1) as f64
                })
                .collect()
        })
        .collect();
    let dists: Vec<f64> = points
        .par_iter()
        .map(|x| {
            distance_to_set(sys, x, omega, opts)
                .map(|(t, _)| t)
                .map_err(|e| GeometryError::AtPoint {
                    x: x.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(dists.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::path_length;

    fn opts(shots: usize) -> ShootingOptions {
        ShootingOptions {
            shots,
            ..ShootingOptions::default()
        }
    }

    #[test]
    fn inside_is_zero() {
        let g = SrSystem::grushin(1);
        let w = BoxRegion::new(vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(distance_to_set(&g, &[0.2, 0.5], &w, &opts(16)).unwrap().0, 0.0);
        assert_eq!(min_observation_time(&g, &w, &w, 4, &opts(16)).unwrap(), 0.0);
    }

    #[test]
    fn flat_distance() {
        let e = SrSystem::elliptic(2).unwrap();
        // target at Euclidean distance 1 along a direction that is not on the grid
        let w = BoxRegion::new(vec![0.8, 0.6], vec![2.0, 2.0]).unwrap();
        let mut prev = f64::INFINITY;
        for shots in [16, 64, 256, 1024] {
            let (dist, path) = distance_to_set(&e, &[0.0, 0.0], &w, &opts(shots)).unwrap();
            assert!(dist <= prev);
            assert!(dist >= 1.0 - 1e-7);
            prev = dist;
            assert!((path_length(&e, &path).unwrap() - dist).abs() < 1e-6);
        }
        assert!(prev - 1.0 < 1e-3, "{prev}");
    }

    #[test]
    fn grushin_strip_is_shot_stable() {
        let g = SrSystem::grushin(1);
        let w = BoxRegion::new(vec![0.3, f64::NEG_INFINITY], vec![0.4, f64::INFINITY]).unwrap();
        let a = distance_to_set(&g, &[0.0, 0.5], &w, &opts(256)).unwrap().0;
        let b = distance_to_set(&g, &[0.0, 0.5], &w, &opts(512)).unwrap().0;
        assert!((a - b).abs() < 1e-3 && b <= a);
        assert!((b - 0.3).abs() < 1e-7);
    }

    #[test]
    fn flat_observation_time_and_monotonicity() {
        let e = SrSystem::elliptic(2).unwrap();
        let domain = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let left = BoxRegion::new(vec![-1.0, -1.0], vec![0.0, 1.0]).unwrap();
        let t = min_observation_time(&e, &domain, &left, 5, &opts(64)).unwrap();
        assert!((t - 1.0).abs() <= 0.03, "{t}");

        let g = SrSystem::grushin(1);
        let small = BoxRegion::new(vec![0.3, -1.0], vec![0.4, 1.0]).unwrap();
        let large = BoxRegion::new(vec![0.2, -1.0], vec![0.6, 1.0]).unwrap();
        assert!(large.contains_box(&small));
        let t_small = min_observation_time(&g, &domain, &small, 4, &opts(64)).unwrap();
        let t_large = min_observation_time(&g, &domain, &large, 4, &opts(64)).unwrap();
        assert!(t_large <= t_small);
    }

    #[test]
    fn unreachable_reports_gap() {
        let e = SrSystem::elliptic(2).unwrap();
        let w = BoxRegion::new(vec![10.0, 10.0], vec![11.0, 11.0]).unwrap();
        match distance_to_set(&e, &[0.0, 0.0], &w, &opts(16)) {
            Err(GeometryError::Unreachable { closest_gap, .. }) => assert!(closest_gap > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heisenberg_shots_reach_vertical_target() {
        let h = SrSystem::heisenberg();
        let w = BoxRegion::new(vec![-0.2, -0.2, 0.5], vec![0.2, 0.2, 0.7]).unwrap();
        let (d, path) = distance_to_set(&h, &[0.0, 0.0, 0.0], &w, &opts(512)).unwrap();
        assert!(d.is_finite() && d > 0.0);
        assert!(w.contains(&path.end().state.x) || w.gap(&path.end().state.x) < 1e-6);
    }
}
