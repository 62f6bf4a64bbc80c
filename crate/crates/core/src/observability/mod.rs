//! Observability experiments: tunneling decay of eigenfunctions away from the
//! degenerate line, heat observability Gramians on frequency-truncated spaces,
//! and the polynomial and Gevrey cost tradeoffs.
//!
//! Costs use the initial-data normalization `‖y₀‖² / ∫∫_ω |y|²`; the final-data
//! form `‖y(T)‖² / ∫∫_ω |y|²` is carried as a secondary column.

mod frequency;
mod lowfreq;
mod tradeoff;
mod tunneling;

pub use frequency::{frequency_cost_experiment, FrequencyBin, FrequencyOptions, FrequencyReport};
pub use lowfreq::{heat_gramian, lowfreq_cost_experiment};
pub use tradeoff::{
    gevrey_cost_experiment, parabolic_tradeoff_experiment, single_mode_gevrey_margin, GevreyOptions, ParabolicOptions,
    TradeoffReport, TradeoffRow,
};
pub use tunneling::tunneling_experiment;

use crate::evolution::{EvolutionError, ObservationRegion};
use crate::numerics::{fit_loglinear, jacobi_eigen, FitResult, NumericsError, SymMatrix};
use crate::spectral::{SpectralBasis, SpectralError};
use crate::textfmt::g17;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Restricted norms below this are dropped from reports altogether.
pub const DROP_FLOOR: f64 = 1e-300;
/// Restricted norms below this stay in reports but are left out of fits.
pub const FIT_FLOOR: f64 = 1e-250;
/// Gramian eigenvalues below this end a truncation sweep.
pub const GRAM_FLOOR: f64 = 1e-280;

#[derive(Debug, Error)]
pub enum ObservabilityError {
    #[error("invalid experiment input: {0}")]
    InvalidInput(String),
    #[error("E_λ for λ = {lambda} is not resolved by the basis (complete only up to {bound})")]
    Incomplete { lambda: f64, bound: f64 },
    #[error("Gramian is not positive semidefinite: smallest eigenvalue {min_eig}")]
    NotPositive { min_eig: f64 },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    /// One row per ground-branch mode; `gram_min_eigs` holds `‖φ_n‖²_{L²(ω)}`.
    Tunneling,
    /// One row per truncation level; `gram_min_eigs` holds the Gramian minimum on `E_λ`.
    LowFrequency,
}

/// Per-row data plus a fit of `−log(gram_min_eig)` against `λ^power`.
///
/// `fitted_prefactor` is `P` in `1/gram_min_eig ≈ P·e^{fitted_exponent·λ^power}`.
#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    pub kind: ReportKind,
    pub lambdas: Vec<f64>,
    pub gram_min_eigs: Vec<f64>,
    /// Fourier index `n` for tunneling rows, `dim E_λ` for truncation rows.
    pub labels: Vec<i64>,
    /// Final-data cost per row (truncation rows only).
    pub final_costs: Vec<f64>,
    pub power: f64,
    pub fitted_exponent: f64,
    pub fitted_prefactor: f64,
    pub fit_quality: FitResult,
    /// The same fit against raw `λ`.
    pub raw_fit: FitResult,
    pub excluded: usize,
    pub truncated: bool,
    pub warnings: Vec<String>,
    pub config_echo: BTreeMap<String, String>,
}

impl ObservabilityReport {
    /// `−log` of the retained row values.
    pub fn log_costs(&self) -> Vec<f64> {
        self.gram_min_eigs.iter().map(|m| -m.ln()).collect()
    }

    /// Rows that enter the fits.
    pub fn fit_rows(&self) -> (Vec<f64>, Vec<f64>) {
        self.lambdas
            .iter()
            .zip(&self.gram_min_eigs)
            .filter(|(_, m)| **m >= FIT_FLOOR)
            .map(|(l, m)| (*l, -m.ln()))
            .unzip()
    }

    /// `r²` of the fit against `λ^p` for each `p`.
    pub fn power_r_squared(&self, powers: &[f64]) -> Result<Vec<f64>, ObservabilityError> {
        let (ls, ys) = self.fit_rows();
        powers.iter().map(|&p| Ok(fit_power(&ls, &ys, p)?.r_squared)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ReportKind::Tunneling => {
                out.push_str("n,lambda,mass\n");
                for ((n, l), m) in self.labels.iter().zip(&self.lambdas).zip(&self.gram_min_eigs) {
                    let _ = writeln!(out, "{n},{},{}", g17(*l), g17(*m));
                }
            }
            ReportKind::LowFrequency => {
                out.push_str("lambda,dim,min_eig,cost,final_cost\n");
                for (i, l) in self.lambdas.iter().enumerate() {
                    let m = self.gram_min_eigs[i];
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        g17(*l),
                        self.labels[i],
                        g17(m),
                        g17(1.0 / m),
                        g17(self.final_costs[i])
                    );
                }
            }
        }
        out
    }

    /// Flat summary; `exponent_in_lambda` is the raw-`λ` slope.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let kind = match self.kind {
            ReportKind::Tunneling => "tunneling",
            ReportKind::LowFrequency => "lowfreq_cost",
        };
        m.insert("experiment".into(), kind.into());
        m.insert("power".into(), number(self.power));
        m.insert("fitted_exponent".into(), number(self.fitted_exponent));
        m.insert("fitted_prefactor".into(), number(self.fitted_prefactor));
        m.insert("r_squared".into(), number(self.fit_quality.r_squared));
        m.insert("residual_max".into(), number(self.fit_quality.residual_max));
        m.insert("exponent_in_lambda".into(), number(self.raw_fit.slope));
        m.insert("raw_r_squared".into(), number(self.raw_fit.r_squared));
        m.insert("rows".into(), self.lambdas.len().into());
        m.insert("excluded".into(), self.excluded.into());
        m.insert("truncated".into(), self.truncated.into());
        m.insert("fit_floor".into(), number(FIT_FLOOR));
        m.insert("drop_floor".into(), number(DROP_FLOOR));
        m.insert("gram_floor".into(), number(GRAM_FLOOR));
        m.insert("warnings".into(), self.warnings.len().into());
        echo_into(&mut m, &self.config_echo);
        Value::Object(m)
    }
}

/// JSON number, `null` when not finite.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub(crate) fn echo_into(m: &mut Map<String, Value>, echo: &BTreeMap<String, String>) {
    for (k, v) in echo {
        m.insert(format!("config_{k}"), Value::String(v.clone()));
    }
}

pub(crate) fn basic_echo(basis: &SpectralBasis, region: &ObservationRegion) -> BTreeMap<String, String> {
    let s = basis.spec();
    let mut e = BTreeMap::new();
    e.insert("family".into(), s.family.as_str().into());
    e.insert("gamma".into(), s.gamma.to_string());
    e.insert("grid_n".into(), s.grid_n.to_string());
    e.insert("fourier_max".into(), s.fourier_max.to_string());
    e.insert("branch_max".into(), s.branch_max.to_string());
    e.insert("x1_lo".into(), g17(region.x1_range.0));
    e.insert("x1_hi".into(), g17(region.x1_range.1));
    e.insert("x2_lo".into(), g17(region.x2_range.0));
    e.insert("x2_hi".into(), g17(region.x2_range.1));
    e
}

pub(crate) fn fit_power(lambdas: &[f64], ys: &[f64], p: f64) -> Result<FitResult, NumericsError> {
    let xs: Vec<f64> = lambdas.iter().map(|l| l.powf(p)).collect();
    fit_loglinear(&xs, ys)
}

/// Smallest eigenvalue of a symmetric matrix, computed block by block over the
/// connected components of its sparsity pattern.
pub fn min_eigenvalue(g: &SymMatrix) -> Result<f64, NumericsError> {
    let n = g.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if g.get(i, j) != 0.0 {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        blocks.entry(r).or_default().push(i);
    }
    let mut best = f64::INFINITY;
    for idx in blocks.values() {
        let sub = SymMatrix::from_fn(idx.len(), |a, b| g.get(idx[a], idx[b]));
        let (vals, _) = jacobi_eigen(&sub, false)?;
        best = best.min(vals[0]);
    }
    Ok(best)
}

/// Largest `μ` such that every mode with `λ ≤ μ` is present in the truncation:
/// the smaller of the top-branch minimum and the top-Fourier ground level.
pub fn completeness_bound(basis: &SpectralBasis) -> f64 {
    let spec = basis.spec();
    let top_branch = basis
        .modes()
        .iter()
        .filter(|m| m.branch == spec.branch_max)
        .map(|m| m.lambda)
        .fold(f64::INFINITY, f64::min);
    let top_fourier = basis
        .modes()
        .iter()
        .filter(|m| m.fourier_n.unsigned_abs() == spec.fourier_max as u64)
        .map(|m| m.lambda)
        .fold(f64::INFINITY, f64::min);
    match spec.lambda_cutoff {
        Some(c) => top_branch.min(top_fourier).min(c),
        None => top_branch.min(top_fourier),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_min_eigenvalue() {
        let g = SymMatrix::from_fn(4, |i, j| match (i, j) {
            (0, 0) | (2, 2) => 2.0,
            (1, 1) | (3, 3) => 3.0,
            (0, 2) | (2, 0) => 1.0,
            _ => 0.0,
        });
        assert!((min_eigenvalue(&g).unwrap() - 1.0).abs() < 1e-14);
        let diag = SymMatrix::from_fn(3, |i, j| if i == j { 5.0 - i as f64 } else { 0.0 });
        assert_eq!(min_eigenvalue(&diag).unwrap(), 3.0);
    }

    #[test]
    fn json_null_for_nan() {
        assert_eq!(number(f64::NAN), Value::Null);
        assert_eq!(number(0.5), serde_json::json!(0.5));
    }
}
