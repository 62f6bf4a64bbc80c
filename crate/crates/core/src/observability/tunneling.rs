use super::{basic_echo, fit_power, ObservabilityError, ObservabilityReport, ReportKind, DROP_FLOOR, FIT_FLOOR};
use crate::evolution::{mode_mass, ObservationRegion};
use crate::spectral::{Family, SpectralBasis};
use rayon::prelude::*;

/// `‖φ_n‖²_{L²(ω)}` for the ground-branch modes with `n > 0` (or the listed `n`),
/// fitted as `−log‖φ_n‖² ≈ s·λ_n^{(γ+1)/2} + c` and against raw `λ_n`.
pub fn tunneling_experiment(
    basis: &SpectralBasis,
    region: &ObservationRegion,
    fourier: Option<&[i64]>,
) -> Result<ObservabilityReport, ObservabilityError> {
    region.validate()?;
    let spec = basis.spec();
    if spec.family == Family::Elliptic || spec.gamma < 1 {
        return Err(ObservabilityError::InvalidInput("tunneling needs a degenerate operator, γ ≥ 1".into()));
    }
    let mut picks: Vec<usize> = match fourier {
        Some(ns) => ns
            .iter()
            .map(|&n| {
                basis
                    .ground_mode(n)
                    .ok_or_else(|| ObservabilityError::InvalidInput(format!("no ground mode with n = {n}")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..basis.len())
            .filter(|&j| basis.modes()[j].branch == 1 && basis.modes()[j].fourier_n > 0)
            .collect(),
    };
    picks.sort_by(|a, b| basis.modes()[*a].lambda.total_cmp(&basis.modes()[*b].lambda));
    picks.dedup();
    let masses: Vec<f64> = picks.par_iter().map(|&j| mode_mass(basis, region, j)).collect();

    let mut report = ObservabilityReport {
        kind: ReportKind::Tunneling,
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
        config_echo: basic_echo(basis, region),
    };
    for (&j, &m) in picks.iter().zip(&masses) {
        let mode = &basis.modes()[j];
        if !(m >= DROP_FLOOR) {
            report.excluded += 1;
            report.warnings.push(format!("n = {}: restricted norm {m:e} underflows, dropped", mode.fourier_n));
            continue;
        }
        if m < FIT_FLOOR {
            report.excluded += 1;
        }
        report.lambdas.push(mode.lambda);
        report.gram_min_eigs.push(m);
        report.labels.push(mode.fourier_n);
    }
    let (ls, ys) = report.fit_rows();
    if ls.len() < 2 {
        return Err(ObservabilityError::InvalidInput(format!("only {} modes left to fit", ls.len())));
    }
    let fit = fit_power(&ls, &ys, report.power)?;
    report.fitted_exponent = fit.slope;
    report.fitted_prefactor = fit.intercept.exp();
    report.fit_quality = fit;
    report.raw_fit = fit_power(&ls, &ys, 1.0)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, OperatorSpec};

    #[test]
    fn full_domain_is_flat() {
        let b = build_basis(&OperatorSpec::grushin(1, 257, 12, 1)).unwrap();
        let r = tunneling_experiment(&b, &ObservationRegion::full(1.0), None).unwrap();
        assert_eq!(r.lambdas.len(), 12);
        assert!(r.gram_min_eigs.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert!(r.fitted_exponent.abs() < 1e-12);
        assert!(r.lambdas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gamma_one_exponent_and_prefactor() {
        let b = build_basis(&OperatorSpec::grushin(1, 2049, 80, 1)).unwrap();
        let a = 0.3;
        let region = ObservationRegion::new((a, 0.9), (0.0, 1.0), (0.0, 1.0)).unwrap();
        let ns: Vec<i64> = (20..=80).step_by(4).collect();
        let r = tunneling_experiment(&b, &region, Some(&ns)).unwrap();
        assert!((r.raw_fit.slope / (a * a) - 1.0).abs() <= 0.1, "{}", r.raw_fit.slope);
        for (n, m) in r.labels.iter().zip(&r.gram_min_eigs) {
            let n = *n as f64;
            let approx = (-a * a * n * std::f64::consts::PI).exp() / (2.0 * a * std::f64::consts::PI * n.sqrt());
            assert!(m / approx > 0.5 && m / approx < 2.0);
        }
        let json = r.to_json();
        assert_eq!(json["experiment"], "tunneling");
        assert!(r.to_csv().starts_with("n,lambda,mass\n20,"));
        assert!(tunneling_experiment(&b, &region, Some(&[500])).is_err());
    }

    #[test]
    fn elliptic_is_rejected() {
        let b = build_basis(&OperatorSpec {
            family: Family::Elliptic,
            ..OperatorSpec::grushin(0, 129, 4, 1)
        })
        .unwrap();
        assert!(tunneling_experiment(&b, &ObservationRegion::full(1.0), None).is_err());
    }
}
