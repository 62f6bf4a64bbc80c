use super::{basic_echo, echo_into, number, ObservabilityError};
use crate::evolution::{heat_cross_gram, ObservationRegion};
use crate::numerics::{fit_loglinear, FitResult};
use crate::spectral::{SpectralBasis, SpectralVector};
use crate::textfmt::g17;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct FrequencyOptions {
    pub t: f64,
    /// Random samples, each supported on `E_μ` with `μ` log-uniform up to `lambda_max`.
    pub samples: usize,
    pub bins: usize,
    pub lambda_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBin {
    pub lo: f64,
    pub hi: f64,
    /// `Λ` of the costliest datum in the bin.
    pub freq: f64,
    pub cost: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct FrequencyReport {
    /// `(Λ, cost)` of every datum, eigenmodes first.
    pub samples: Vec<(f64, f64)>,
    pub bins: Vec<FrequencyBin>,
    pub k: f64,
    /// Fit of `log cost` against `Λ^k` over the bin maxima.
    pub fit: FitResult,
    pub lowest_mode: (f64, f64),
    pub config_echo: BTreeMap<String, String>,
}

impl FrequencyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_lo,freq_hi,freq,cost,count\n");
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{},{},{}", g17(b.lo), g17(b.hi), g17(b.freq), g17(b.cost), b.count);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), "frequency_cost".into());
        m.insert("k".into(), number(self.k));
        m.insert("fitted_exponent".into(), number(self.fit.slope));
        m.insert("fitted_prefactor".into(), number(self.fit.intercept.exp()));
        m.insert("r_squared".into(), number(self.fit.r_squared));
        m.insert("bins".into(), self.bins.len().into());
        m.insert("samples".into(), self.samples.len().into());
        m.insert("lowest_mode_freq".into(), number(self.lowest_mode.0));
        m.insert("lowest_mode_cost".into(), number(self.lowest_mode.1));
        echo_into(&mut m, &self.config_echo);
        Value::Object(m)
    }
}

/// Cost `‖y₀‖² / ∫₀^T∫_ω|y|²` against the frequency function
/// `Λ = ‖y₀‖_{H¹_L}/‖y₀‖` over eigenmodes and random data, binned uniformly
/// in `Λ^k`; the bin maxima are fitted as `log cost ≈ s·Λ^k + c`.
pub fn frequency_cost_experiment(
    basis: &Arc<SpectralBasis>,
    region: &ObservationRegion,
    opts: &FrequencyOptions,
) -> Result<FrequencyReport, ObservabilityError> {
    if opts.bins < 2 {
        return Err(ObservabilityError::InvalidInput("need at least two bins".into()));
    }
    if !(opts.t > 0.0) {
        return Err(ObservabilityError::InvalidInput("T must be positive".into()));
    }
    let window = ObservationRegion::new(region.x1_range, region.x2_range, (0.0, opts.t))?;
    let idx: Vec<usize> = (0..basis.len()).filter(|&j| basis.modes()[j].lambda <= opts.lambda_max).collect();
    if idx.len() < 2 {
        return Err(ObservabilityError::InvalidInput(format!("E_λ too small for λ = {}", opts.lambda_max)));
    }
    let lam: Vec<f64> = idx.iter().map(|&j| basis.modes()[j].lambda).collect();
    let g = heat_cross_gram(basis, &window, &idx)?;
    let k = basis.spec().k() as f64;

    let measure = |c: &[f64]| -> Result<(f64, f64), ObservabilityError> {
        let mut v = vec![0.0; basis.len()];
        for (a, &j) in idx.iter().enumerate() {
            v[j] = c[a];
        }
        let v = SpectralVector::new(Arc::clone(basis), v)?;
        let freq = v.frequency_function(1.0)?;
        let support: Vec<usize> = (0..c.len()).filter(|&a| c[a] != 0.0).collect();
        let mut obs = 0.0;
        for &a in &support {
            for &b in &support {
                obs += c[a] * c[b] * g.get(a, b);
            }
        }
        Ok((freq, v.l2_norm().powi(2) / obs))
    };

    let mut samples = Vec::with_capacity(idx.len() + opts.samples);
    for a in 0..idx.len() {
        let mut c = vec![0.0; idx.len()];
        c[a] = 1.0;
        samples.push(measure(&c)?);
    }
    let lowest = samples[0];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo_mu, hi_mu) = (lam[0].max(1e-3).ln(), opts.lambda_max.ln());
    for _ in 0..opts.samples {
        let mu = rng.gen_range(lo_mu..=hi_mu).exp();
        let c: Vec<f64> = lam
            .iter()
            .map(|l| if *l <= mu { rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
            .collect();
        if c.iter().all(|x| *x == 0.0) {
            continue;
        }
        samples.push(measure(&c)?);
    }

    let xk = |f: f64| f.powf(k);
    let lo = samples.iter().map(|s| xk(s.0)).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| xk(s.0)).fold(0.0, f64::max);
    let width = (hi - lo) / opts.bins as f64;
    let mut bins: Vec<FrequencyBin> = (0..opts.bins)
        .map(|b| FrequencyBin {
            lo: (lo + b as f64 * width).powf(1.0 / k),
            hi: (lo + (b + 1) as f64 * width).powf(1.0 / k),
            freq: f64::NAN,
            cost: 0.0,
            count: 0,
        })
        .collect();
    for &(f, c) in &samples {
        let b = (((xk(f) - lo) / width) as usize).min(opts.bins - 1);
        let bin = &mut bins[b];
        bin.count += 1;
        if c > bin.cost {
            bin.cost = c;
            bin.freq = f;
        }
    }
    bins.retain(|b| b.count > 0);
    let xs: Vec<f64> = bins.iter().map(|b| xk(b.freq)).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.cost.ln()).collect();
    let fit = fit_loglinear(&xs, &ys)?;

    let mut config_echo = basic_echo(basis, region);
    config_echo.insert("T".into(), g17(opts.t));
    config_echo.insert("samples".into(), opts.samples.to_string());
    config_echo.insert("bins".into(), opts.bins.to_string());
    config_echo.insert("lambda_max".into(), g17(opts.lambda_max));
    config_echo.insert("seed".into(), opts.seed.to_string());
    Ok(FrequencyReport {
        samples,
        bins,
        k,
        fit,
        lowest_mode: lowest,
        config_echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};

    fn run(grid_n: usize) -> FrequencyReport {
        let b = Arc::new(build_basis(&OperatorSpec::grushin(1, grid_n, 40, 8)).unwrap());
        let r = ObservationRegion::new((0.3, 0.9), (0.0, 1.0), (0.0, 1.0)).unwrap();
        let opts = FrequencyOptions {
            t: 1.0,
            samples: 200,
            bins: 10,
            lambda_max: 120.0,
            seed: 1,
        };
        frequency_cost_experiment(&b, &r, &opts).unwrap()
    }

    #[test]
    fn binned_cost_grows_with_frequency() {
        let coarse = run(513);
        let fine = run(1025);
        let (f0, c0) = fine.lowest_mode;
        let b = build_basis(&OperatorSpec::grushin(1, 1025, 40, 8)).unwrap();
        assert!((f0 - (1.0 + b.modes()[0].lambda).sqrt()).abs() < 1e-12);
        assert!(c0.is_finite() && fine.bins.iter().all(|b| c0 <= b.cost));
        assert!(fine.bins.windows(2).all(|w| w[0].cost <= w[1].cost), "{:?}", fine.bins);
        assert!(fine.fit.slope > 0.0);
        assert!((coarse.fit.slope / fine.fit.slope - 1.0).abs() < 0.2);
        assert!(fine.to_csv().starts_with("freq_lo,freq_hi,freq,cost,count\n"));
    }
}
