use super::{basic_echo, echo_into, number, ObservabilityError};
use crate::evolution::{exp_integral, heat_cross_gram, mode_mass, ObservationRegion};
use crate::numerics::{fit_loglinear, SymMatrix};
use crate::spectral::{Family, SpectralBasis, SpectralVector};
use crate::textfmt::g17;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ParabolicOptions {
    /// Observation times, ascending.
    pub t_list: Vec<f64>,
    pub eta: f64,
    /// Constant in front of `‖y(T)‖²`.
    pub d: f64,
    pub epsilons: Vec<f64>,
    /// Eigenmodes and random data live in `E_{lambda_max}`.
    pub lambda_max: f64,
    pub random_count: usize,
    pub seed: u64,
}

impl ParabolicOptions {
    pub fn new(t_list: Vec<f64>, lambda_max: f64) -> Self {
        ParabolicOptions {
            t_list,
            eta: 0.01,
            d: 1.0,
            epsilons: default_epsilons(),
            lambda_max,
            random_count: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GevreyOptions {
    pub t: f64,
    /// Gevrey parameters, ascending.
    pub thetas: Vec<f64>,
    /// Measured tunneling constant playing the role of the threshold `θ₀`.
    pub theta0: f64,
    pub epsilons: Vec<f64>,
    /// Random low-frequency data live in `E_{lambda_low}`.
    pub lambda_low: f64,
    pub random_count: usize,
    pub seed: u64,
}

impl GevreyOptions {
    pub fn new(t: f64, thetas: Vec<f64>, theta0: f64, lambda_low: f64) -> Self {
        GevreyOptions {
            t,
            thetas,
            theta0,
            epsilons: default_epsilons(),
            lambda_low,
            random_count: 50,
            seed: 0,
        }
    }
}

/// `10^{−k/2}` for `k = 0, …, 16`, then `2`.
pub fn default_epsilons() -> Vec<f64> {
    let mut e: Vec<f64> = (0..=16).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect();
    e.push(2.0);
    e
}

/// One evaluation of `lhs ≤ ε^{−p}·observation + ε·norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    /// `T` for the parabolic table, `θ` for the Gevrey table.
    pub param: f64,
    pub epsilon: f64,
    pub data: String,
    pub lhs: f64,
    pub observation: f64,
    /// `‖y(0)‖²` or its Gevrey counterpart.
    pub norm: f64,
    /// Smallest `p ≥ 0` for which this row holds.
    pub needed: f64,
    /// Right-hand side at the per-parameter minimal exponent.
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct TradeoffReport {
    pub experiment: &'static str,
    pub params: Vec<f64>,
    /// Minimal exponent making every row hold, per parameter.
    pub minimal: Vec<f64>,
    /// Rows violated when the minimal exponent is halved, per parameter.
    pub violations_at_half: Vec<usize>,
    /// Threshold fitted from `minimal`: `T₀` or `θ₀`.
    pub fitted_threshold: f64,
    pub rows: Vec<TradeoffRow>,
    pub config_echo: BTreeMap<String, String>,
}

impl TradeoffReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.minimal.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let name = if self.experiment == "parabolic" { "T" } else { "theta" };
        let mut out = format!("{name},epsilon,data,lhs,observation,norm,needed,rhs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                g17(r.param),
                g17(r.epsilon),
                r.data,
                g17(r.lhs),
                g17(r.observation),
                g17(r.norm),
                g17(r.needed),
                g17(r.rhs)
            );
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), self.experiment.into());
        m.insert("params".into(), Value::Array(self.params.iter().map(|x| number(*x)).collect()));
        m.insert("minimal_exponents".into(), Value::Array(self.minimal.iter().map(|x| number(*x)).collect()));
        m.insert(
            "violations_at_half".into(),
            Value::Array(self.violations_at_half.iter().map(|x| (*x).into()).collect()),
        );
        m.insert("fitted_threshold".into(), number(self.fitted_threshold));
        m.insert("strictly_decreasing".into(), self.strictly_decreasing().into());
        m.insert("rows".into(), self.rows.len().into());
        echo_into(&mut m, &self.config_echo);
        Value::Object(m)
    }
}

/// Smallest `p ≥ 0` with `lhs ≤ ε^{−p}·obs + ε·norm`.
fn needed_exponent(lhs: f64, obs: f64, norm: f64, eps: f64) -> f64 {
    let slack = lhs - eps * norm;
    if slack <= 0.0 || eps >= 1.0 {
        return 0.0;
    }
    ((slack / obs).ln() / (1.0 / eps).ln()).max(0.0)
}

fn rhs_at(p: f64, obs: f64, norm: f64, eps: f64) -> f64 {
    eps.powf(-p) * obs + eps * norm
}

/// Sets `needed` from the raw row values, then fills `rhs` and counts
/// violations at half the per-parameter minimum.
fn finish(rows: &mut [TradeoffRow], params: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut minimal = Vec::with_capacity(params.len());
    let mut violations = Vec::with_capacity(params.len());
    for &p in params {
        let sel = |r: &&mut TradeoffRow| r.param == p;
        let best = rows.iter_mut().filter(sel).map(|r| r.needed).fold(0.0, f64::max);
        let mut bad = 0;
        for r in rows.iter_mut().filter(sel) {
            r.rhs = rhs_at(best, r.observation, r.norm, r.epsilon);
            if r.lhs > rhs_at(best / 2.0, r.observation, r.norm, r.epsilon) {
                bad += 1;
            }
        }
        minimal.push(best);
        violations.push(bad);
    }
    (minimal, violations)
}

fn check_ascending(xs: &[f64], what: &str) -> Result<(), ObservabilityError> {
    if xs.is_empty() || xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
        return Err(ObservabilityError::InvalidInput(format!("{what} must be finite and strictly ascending")));
    }
    Ok(())
}

fn check_epsilons(eps: &[f64]) -> Result<(), ObservabilityError> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(ObservabilityError::InvalidInput("epsilon grid must be positive and finite".into()));
    }
    Ok(())
}

fn quad_form(g: &SymMatrix, c: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            total += c[i] * c[j] * g.get(i, j);
        }
    }
    total
}

/// Normalized standard normal coefficients on the leading `dim` modes.
fn random_data(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut c: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= n);
            c
        })
        .collect()
}

/// `D‖y(T)‖² ≤ ε^{−β}∫₀^T∫_ω|y|² + ε‖y(0)‖²` on eigenmodes of `E_{lambda_max}`
/// (closed form from their restricted masses) and on random data there. The
/// minimal `β(T)` is reported per `T`, with `T₀` fitted from
/// `1/β = T/T₀ − 1 − η/T₀`.
pub fn parabolic_tradeoff_experiment(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    opts: &ParabolicOptions,
) -> Result<TradeoffReport, ObservabilityError> {
    region.validate()?;
    let spec = basis.spec();
    if spec.gamma != 1 || spec.family == Family::Elliptic {
        return Err(ObservabilityError::InvalidInput("the parabolic tradeoff needs γ = 1 (k = 2)".into()));
    }
    check_ascending(&opts.t_list, "T list")?;
    check_epsilons(&opts.epsilons)?;
    if opts.t_list[0] <= opts.eta || !(opts.eta >= 0.0) {
        return Err(ObservabilityError::InvalidInput(format!("need T > η = {}", opts.eta)));
    }
    if !(opts.d > 0.0) {
        return Err(ObservabilityError::InvalidInput("D must be positive".into()));
    }
    let idx: Vec<usize> = (0..basis.len()).filter(|&j| basis.modes()[j].lambda <= opts.lambda_max).collect();
    if idx.is_empty() {
        return Err(ObservabilityError::InvalidInput(format!("E_λ is empty for λ = {}", opts.lambda_max)));
    }
    let lam: Vec<f64> = idx.iter().map(|&j| basis.modes()[j].lambda).collect();
    let masses: Vec<f64> = idx.iter().map(|&j| mode_mass(basis, region, j)).collect();
    let random = random_data(idx.len(), opts.random_count, opts.seed);

    let mut rows = Vec::new();
    for &t in &opts.t_list {
        let window = ObservationRegion::new(region.x1_range, region.x2_range, (0.0, t))?;
        let mut push = |data: String, lhs: f64, obs: f64| {
            for &eps in &opts.epsilons {
                rows.push(TradeoffRow {
                    param: t,
                    epsilon: eps,
                    data: data.clone(),
                    lhs,
                    observation: obs,
                    norm: 1.0,
                    needed: needed_exponent(lhs, obs, 1.0, eps),
                    rhs: f64::NAN,
                });
            }
        };
        for (a, &j) in idx.iter().enumerate() {
            let m = &basis.modes()[j];
            let lhs = opts.d * (-2.0 * lam[a] * t).exp();
            let obs = masses[a] * exp_integral(2.0 * lam[a], 0.0, t);
            push(format!("mode_{}_{}", m.fourier_n, m.branch), lhs, obs);
        }
        if !random.is_empty() {
            let g = heat_cross_gram(basis, &window, &idx)?;
            for (r, c) in random.iter().enumerate() {
                let lhs = opts.d * c.iter().zip(&lam).map(|(x, l)| x * x * (-2.0 * l * t).exp()).sum::<f64>();
                push(format!("random_{r}"), lhs, quad_form(&g, c));
            }
        }
    }
    let (minimal, violations_at_half) = finish(&mut rows, &opts.t_list);
    let (ts, inv): (Vec<f64>, Vec<f64>) = opts
        .t_list
        .iter()
        .zip(&minimal)
        .filter(|(_, b)| **b > 0.0)
        .map(|(t, b)| (*t, 1.0 / b))
        .unzip();
    let fitted_threshold = match fit_loglinear(&ts, &inv) {
        Ok(f) if f.slope > 0.0 => 1.0 / f.slope,
        _ => f64::NAN,
    };
    let mut config_echo = basic_echo(basis, region);
    config_echo.insert("eta".into(), g17(opts.eta));
    config_echo.insert("D".into(), g17(opts.d));
    config_echo.insert("lambda_max".into(), g17(opts.lambda_max));
    config_echo.insert("random_count".into(), opts.random_count.to_string());
    config_echo.insert("seed".into(), opts.seed.to_string());
    Ok(TradeoffReport {
        experiment: "parabolic",
        params: opts.t_list.clone(),
        minimal,
        violations_at_half,
        fitted_threshold,
        rows,
        config_echo,
    })
}

/// `‖y(T)‖² ≤ ε^{−p}∫₀^T∫_ω|y|² + ε‖y(0)‖²_{k/2,θ}` with the Gevrey norm
/// `Σ e^{2θλ^{k/2}}|y₀_j|²`. Data: every eigenmode passing the overflow guard,
/// random data in `E_{lambda_low}`, and mixtures of such data with a high
/// ground mode damped by `e^{−θ₀λ^{k/2}}`. The minimal `p(θ)` is reported per
/// `θ` next to the prescribed `θ₀/(θ−θ₀)`.
pub fn gevrey_cost_experiment(
    basis: &Arc<SpectralBasis>,
    region: &ObservationRegion,
    opts: &GevreyOptions,
) -> Result<TradeoffReport, ObservabilityError> {
    region.validate()?;
    check_ascending(&opts.thetas, "theta list")?;
    check_epsilons(&opts.epsilons)?;
    if !(opts.theta0 > 0.0) || opts.thetas[0] <= opts.theta0 {
        return Err(ObservabilityError::InvalidInput(format!(
            "need θ > θ₀ = {} for every θ in the sweep",
            opts.theta0
        )));
    }
    if !(opts.t > 0.0) {
        return Err(ObservabilityError::InvalidInput("T must be positive".into()));
    }
    let half_k = (basis.spec().gamma as f64 + 1.0) / 2.0;
    let theta_max = opts.thetas[opts.thetas.len() - 1];
    let guard = |l: f64| theta_max * l.powf(half_k) <= 700.0;
    let idx: Vec<usize> = (0..basis.len()).filter(|&j| guard(basis.modes()[j].lambda)).collect();
    if idx.is_empty() {
        return Err(ObservabilityError::InvalidInput("no mode passes the Gevrey overflow guard".into()));
    }
    let lam: Vec<f64> = idx.iter().map(|&j| basis.modes()[j].lambda).collect();
    let low = lam.iter().take_while(|l| **l <= opts.lambda_low).count();
    let window = ObservationRegion::new(region.x1_range, region.x2_range, (0.0, opts.t))?;
    let g = heat_cross_gram(basis, &window, &idx)?;

    let mut data: Vec<(String, Vec<f64>)> = Vec::new();
    for (a, &j) in idx.iter().enumerate() {
        let m = &basis.modes()[j];
        let mut c = vec![0.0; idx.len()];
        c[a] = 1.0;
        data.push((format!("mode_{}_{}", m.fourier_n, m.branch), c));
    }
    let highs: Vec<usize> = (low..idx.len()).filter(|&a| basis.modes()[idx[a]].branch == 1).collect();
    for (r, c) in random_data(low, opts.random_count, opts.seed).into_iter().enumerate() {
        let mut full = c.clone();
        full.resize(idx.len(), 0.0);
        data.push((format!("random_{r}"), full.clone()));
        if !highs.is_empty() {
            let a = highs[r % highs.len()];
            full[a] = (-opts.theta0 * lam[a].powf(half_k)).exp();
            data.push((format!("mixed_{r}"), full));
        }
    }

    let mut rows = Vec::new();
    let embed = |c: &[f64]| {
        let mut v = vec![0.0; basis.len()];
        for (a, &j) in idx.iter().enumerate() {
            v[j] = c[a];
        }
        SpectralVector::new(Arc::clone(basis), v)
    };
    for (label, c) in &data {
        let lhs = c.iter().zip(&lam).map(|(x, l)| x * x * (-2.0 * l * opts.t).exp()).sum::<f64>();
        let obs = quad_form(&g, c);
        let v = embed(c)?;
        for &theta in &opts.thetas {
            let norm = v.gevrey_norm(half_k, theta)?.powi(2);
            for &eps in &opts.epsilons {
                rows.push(TradeoffRow {
                    param: theta,
                    epsilon: eps,
                    data: label.clone(),
                    lhs,
                    observation: obs,
                    norm,
                    needed: needed_exponent(lhs, obs, norm, eps),
                    rhs: f64::NAN,
                });
            }
        }
    }
    let (minimal, violations_at_half) = finish(&mut rows, &opts.thetas);
    let mut config_echo = basic_echo(basis, region);
    config_echo.insert("T".into(), g17(opts.t));
    config_echo.insert("theta0".into(), g17(opts.theta0));
    config_echo.insert("lambda_low".into(), g17(opts.lambda_low));
    config_echo.insert("random_count".into(), opts.random_count.to_string());
    config_echo.insert("seed".into(), opts.seed.to_string());
    Ok(TradeoffReport {
        experiment: "gevrey",
        params: opts.thetas.clone(),
        minimal,
        violations_at_half,
        fitted_threshold: opts.theta0,
        rows,
        config_echo,
    })
}

/// `min_ε log(rhs/lhs)` for `y₀ = e^{−θλ_j^{k/2}}φ_j` at the prescribed
/// exponent `θ₀/(θ−θ₀)`; positive means the inequality holds with room.
pub fn single_mode_gevrey_margin(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    t: f64,
    theta: f64,
    theta0: f64,
    j: usize,
    epsilons: &[f64],
) -> Result<f64, ObservabilityError> {
    if !(theta > theta0 && theta0 > 0.0) {
        return Err(ObservabilityError::InvalidInput(format!("need θ > θ₀ > 0, got θ = {theta}, θ₀ = {theta0}")));
    }
    check_epsilons(epsilons)?;
    let l = basis.modes()[j].lambda;
    let half_k = (basis.spec().gamma as f64 + 1.0) / 2.0;
    let damp = -2.0 * theta * l.powf(half_k);
    let p = theta0 / (theta - theta0);
    let log_lhs = damp - 2.0 * l * t;
    let log_obs = damp + (mode_mass(basis, region, j) * exp_integral(2.0 * l, 0.0, t)).ln();
    let margin = epsilons
        .iter()
        .map(|&eps| {
            let (x, y) = (-p * eps.ln() + log_obs, eps.ln());
            let hi = x.max(y);
            hi + ((x - hi).exp() + (y - hi).exp()).ln() - log_lhs
        })
        .fold(f64::INFINITY, f64::min);
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};

    fn setup() -> (Arc<SpectralBasis>, ObservationRegion) {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, 513, 40, 8)).unwrap());
        (b, ObservationRegion::new((0.3, 0.9), (0.0, 1.0), (0.0, 1.0)).unwrap())
    }

    #[test]
    fn needed_exponent_algebra() {
        assert_eq!(needed_exponent(0.5, 1e-3, 1.0, 1.0), 0.0);
        assert_eq!(needed_exponent(0.5, 1e-3, 1.0, 0.6), 0.0);
        let p = needed_exponent(0.5, 1e-3, 1.0, 0.01);
        assert!((rhs_at(p, 1e-3, 1.0, 0.01) / 0.5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parabolic_sweep() {
        let (b, r) = setup();
        let opts = ParabolicOptions::new(vec![0.0125, 0.025, 0.05, 0.1, 0.2], 120.0);
        let rep = parabolic_tradeoff_experiment(&b, &r, &opts).unwrap();
        assert!(rep.minimal.iter().all(|m| m.is_finite()), "{:?}", rep.minimal);
        assert!(rep.strictly_decreasing(), "{:?}", rep.minimal);
        for row in &rep.rows {
            assert!(row.lhs <= row.rhs * (1.0 + 1e-12));
            if row.epsilon >= 1.0 {
                assert!(row.lhs <= row.epsilon * row.norm);
            }
        }
        for (m, v) in rep.minimal.iter().zip(&rep.violations_at_half) {
            assert!(*m == 0.0 || *v > 0);
        }
        assert!(rep.to_csv().starts_with("T,epsilon,data,lhs,observation,norm,needed,rhs\n"));
        assert_eq!(rep.to_json()["experiment"], "parabolic");
    }

    #[test]
    fn gevrey_sweep() {
        let (b, r) = setup();
        let theta0 = 0.045;
        let opts = GevreyOptions::new(0.05, vec![0.06, 0.08, 0.12, 0.2, 0.4], theta0, 40.0);
        let rep = gevrey_cost_experiment(&b, &r, &opts).unwrap();
        assert!(rep.minimal.windows(2).all(|w| w[1] <= w[0]), "{:?}", rep.minimal);
        assert!(rep.minimal[0] > rep.minimal[rep.minimal.len() - 1]);
        for row in &rep.rows {
            assert!(row.lhs <= row.rhs * (1.0 + 1e-12), "{row:?}");
        }
        let bad = GevreyOptions::new(0.05, vec![0.04, 0.08], theta0, 40.0);
        assert!(gevrey_cost_experiment(&b, &r, &bad).is_err());
    }

    #[test]
    fn single_high_mode_margin() {
        let (b, r) = setup();
        let theta0 = 0.05;
        for n in [10, 20, 40] {
            let j = b.ground_mode(n).unwrap();
            for theta in [0.06, 0.1, 0.5] {
                let m = single_mode_gevrey_margin(&b, &r, 0.5, theta, theta0, j, &default_epsilons()).unwrap();
                assert!(m > 0.0, "n={n} θ={theta} margin {m}");
            }
        }
    }
}
