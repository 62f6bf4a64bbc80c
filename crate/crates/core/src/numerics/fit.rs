use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
///
/// Used on already-transformed data (log y against λ, log λ against log n, …),
/// hence the name. Abscissae must be strictly increasing, at least three points.
pub fn fit_loglinear(xs: &[f64], ys: &[f64]) -> Result<FitResult, NumericsError> {
    if xs.len() != ys.len() {
        return Err(NumericsError::InvalidInput(format!(
            "fit needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(NumericsError::InvalidInput(format!("fit needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(NumericsError::InvalidInput("fit data must be finite".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NumericsError::InvalidInput("fit abscissae must be strictly increasing".into()));
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx <= f64::MIN_POSITIVE * n || sxx <= 1e-300 {
        return Err(NumericsError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut ss_res = 0.0;
    let mut residual_max: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
        residual_max = residual_max.max(r.abs());
    }
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        residual_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let f = fit_loglinear(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn stable_under_tiny_perturbation() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let mut ys = xs.clone();
        ys[4] += 1e-9;
        let f = fit_loglinear(&xs, &ys).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-8);
    }

    #[test]
    fn recovers_exponential_rate() {
        let xs: Vec<f64> = (1..=10).map(|k| 50.0 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|l| (-0.09 * l).exp().ln()).collect();
        let f = fit_loglinear(&xs, &ys).unwrap();
        assert!((f.slope + 0.09).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_loglinear(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_loglinear(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglinear(&[1.0, 2.0, 3.0], &[1.0, f64::NAN, 3.0]).is_err());
    }
}
