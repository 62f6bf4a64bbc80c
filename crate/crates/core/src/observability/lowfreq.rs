use super::{
    basic_echo, completeness_bound, fit_power, min_eigenvalue, ObservabilityError, ObservabilityReport, ReportKind,
    GRAM_FLOOR,
};
use crate::evolution::{exp_integral, heat_cross_gram, spatial_cross_gram, ObservationRegion};
use crate::numerics::SymMatrix;
use crate::spectral::SpectralBasis;
use crate::textfmt::g17;

fn window(region: &ObservationRegion, t: f64) -> Result<ObservationRegion, ObservabilityError> {
    if !(t > 0.0) {
        return Err(ObservabilityError::InvalidInput(format!("observation time must be positive, got {t}")));
    }
    Ok(ObservationRegion::new(region.x1_range, region.x2_range, (0.0, t))?)
}

/// Modes spanning `E_λ` and the heat Gramian `∫₀^T∫_ω e^{−(λ_i+λ_j)t}φ_iφ_j` on them.
pub fn heat_gramian(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    t: f64,
    lambda: f64,
) -> Result<(Vec<usize>, SymMatrix), ObservabilityError> {
    let w = window(region, t)?;
    let idx: Vec<usize> = (0..basis.len()).filter(|&j| basis.modes()[j].lambda <= lambda).collect();
    if idx.is_empty() {
        return Err(ObservabilityError::InvalidInput(format!("E_λ is empty for λ = {lambda}")));
    }
    let g = heat_cross_gram(basis, &w, &idx)?;
    Ok((idx, g))
}

/// `cost(λ) = 1/min eig` of the heat Gramian on `E_λ` for each `λ` of the grid,
/// fitted as `log cost ≈ s·λ^{k/2} + c`. The sweep stops early once the
/// minimum drops below `GRAM_FLOOR`.
pub fn lowfreq_cost_experiment(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    t: f64,
    lambda_grid: &[f64],
) -> Result<ObservabilityReport, ObservabilityError> {
    if lambda_grid.len() < 4 || lambda_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ObservabilityError::InvalidInput("λ grid must be strictly ascending with at least 4 points".into()));
    }
    let top = lambda_grid[lambda_grid.len() - 1];
    let bound = completeness_bound(basis);
    if top > bound {
        return Err(ObservabilityError::Incomplete { lambda: top, bound });
    }
    let w = window(region, t)?;
    let all: Vec<usize> = (0..basis.len()).filter(|&j| basis.modes()[j].lambda <= top).collect();
    if all.is_empty() || basis.modes()[all[0]].lambda > lambda_grid[0] {
        return Err(ObservabilityError::InvalidInput(format!("E_λ is empty for λ = {}", lambda_grid[0])));
    }
    let spatial = spatial_cross_gram(basis, &w, &all);
    let heat = heat_cross_gram(basis, &w, &all)?;
    let lam = |a: usize| basis.modes()[all[a]].lambda;

    let spec = basis.spec();
    let mut config_echo = basic_echo(basis, region);
    config_echo.insert("T".into(), g17(t));
    let mut report = ObservabilityReport {
        kind: ReportKind::LowFrequency,
        lambdas: Vec::new(),
        gram_min_eigs: Vec::new(),
        labels: Vec::new(),
        final_costs: Vec::new(),
        power: (spec.gamma as f64 + 1.0) / 2.0,
        fitted_exponent: f64::NAN,
        fitted_prefactor: f64::NAN,
        fit_quality: Default::default(),
        raw_fit: Default::default(),
        excluded: 0,
        truncated: false,
        warnings: Vec::new(),
        config_echo,
    };
    for &level in lambda_grid {
        let dim = (0..all.len()).take_while(|&a| lam(a) <= level).count();
        let g = SymMatrix::from_fn(dim, |a, b| heat.get(a, b));
        let scale = (0..dim).map(|a| g.get(a, a)).fold(0.0, f64::max);
        let m = min_eigenvalue(&g)?;
        if m < -1e-12 * scale {
            return Err(ObservabilityError::NotPositive { min_eig: m });
        }
        if !(m >= GRAM_FLOOR) {
            report.truncated = true;
            report.warnings.push(format!("λ = {level}: Gramian minimum {m:e} below floor, sweep stopped"));
            break;
        }
        // ‖y(T)‖²-normalized Gramian: e^{(λ_i+λ_j)T}G_{ij} = S_{ij}∫₀^T e^{(λ_i+λ_j)s}ds
        let fin = SymMatrix::from_fn(dim, |a, b| {
            let s = spatial.get(a, b);
            if s == 0.0 {
                0.0
            } else {
                s * exp_integral(-(lam(a) + lam(b)), 0.0, t)
            }
        });
        let final_cost = if (0..dim).all(|a| fin.get(a, a).is_finite()) {
            1.0 / min_eigenvalue(&fin)?
        } else {
            f64::NAN
        };
        report.lambdas.push(level);
        report.gram_min_eigs.push(m);
        report.labels.push(dim as i64);
        report.final_costs.push(final_cost);
    }
    let (ls, ys) = report.fit_rows();
    if ls.len() < 2 {
        return Err(ObservabilityError::InvalidInput(format!("only {} truncation levels left to fit", ls.len())));
    }
    let fit = fit_power(&ls, &ys, report.power)?;
    report.fitted_exponent = fit.slope;
    report.fitted_prefactor = fit.intercept.exp();
    report.fit_quality = fit;
    report.raw_fit = fit_power(&ls, &ys, 1.0)?;
    Ok(report)
}
