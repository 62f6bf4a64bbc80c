use crate::config::{ConfigError, Reader};
use hypolab::acceptance::{criterion_ids, run_criterion};
use hypolab::evolution::ObservationRegion;
use hypolab::geometry::{
    distance_to_set, flow_geodesic, hamiltonian, path_length, BoxRegion, CotangentState, ShootingOptions, SrSystem,
};
use hypolab::observability::{
    frequency_cost_experiment, gevrey_cost_experiment, lowfreq_cost_experiment, number, parabolic_tradeoff_experiment,
    tunneling_experiment, FrequencyOptions, GevreyOptions, ParabolicOptions,
};
use hypolab::spectral::{build_basis, build_basis_for, subelliptic_ratio, Family, OperatorSpec, SpectralBasis, X2Mode};
use hypolab::textfmt::g17;
use hypolab::transmutation::{correction_exponent, lambda_sweep, sweep_csv, TransmuteParams};
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Spectrum,
    Tunneling,
    Geodesics,
    Transmute,
    LowfreqCost,
    Parabolic,
    Gevrey,
    FrequencyCost,
    Subelliptic,
    AcceptAll,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Spectrum,
        Experiment::Tunneling,
        Experiment::Geodesics,
        Experiment::Transmute,
        Experiment::LowfreqCost,
        Experiment::Parabolic,
        Experiment::Gevrey,
        Experiment::FrequencyCost,
        Experiment::Subelliptic,
        Experiment::AcceptAll,
    ];

    /// Name used in config files and artifact file names.
    pub fn key(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Tunneling => "tunneling",
            Experiment::Geodesics => "geodesics",
            Experiment::Transmute => "transmute",
            Experiment::LowfreqCost => "lowfreq_cost",
            Experiment::Parabolic => "parabolic",
            Experiment::Gevrey => "gevrey",
            Experiment::FrequencyCost => "frequency_cost",
            Experiment::Subelliptic => "subelliptic",
            Experiment::AcceptAll => "accept_all",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.key() == s)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{module}::{op}: {message}")]
    Numerical {
        module: &'static str,
        op: &'static str,
        message: String,
    },
}

fn numerical<E: std::fmt::Display>(module: &'static str, op: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Numerical {
        module,
        op,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub enum Job {
    Spectrum {
        spec: OperatorSpec,
    },
    Tunneling {
        spec: OperatorSpec,
        region: ObservationRegion,
        levels: Option<Vec<u64>>,
    },
    Geodesics {
        system: SrSystem,
        start: CotangentState,
        length: f64,
        step: f64,
        target: Option<(BoxRegion, ShootingOptions)>,
    },
    Transmute {
        params: TransmuteParams,
        lambdas: Vec<f64>,
    },
    LowfreqCost {
        spec: OperatorSpec,
        region: ObservationRegion,
        grid: Vec<f64>,
    },
    Parabolic {
        spec: OperatorSpec,
        region: ObservationRegion,
        opts: ParabolicOptions,
    },
    Gevrey {
        spec: OperatorSpec,
        region: ObservationRegion,
        opts: GevreyOptions,
    },
    FrequencyCost {
        spec: OperatorSpec,
        region: ObservationRegion,
        opts: FrequencyOptions,
    },
    Subelliptic {
        spec: OperatorSpec,
        bands: u32,
        q_base: u32,
        trials: usize,
    },
    AcceptAll {
        criteria: Vec<u8>,
    },
}

/// A fully validated run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tolerances: Vec<(String, f64)>,
    pub job: Job,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

const DEFAULT_REGION: ((f64, f64), (f64, f64), (f64, f64)) = ((0.3, 0.9), (0.0, 1.0), (0.0, 1.0));

struct OperatorDefaults {
    family: Family,
    grid_n: usize,
    fourier_max: usize,
    branch_max: usize,
}

const OPERATOR_DEFAULTS: OperatorDefaults = OperatorDefaults {
    family: Family::GrushinRectangle,
    grid_n: 1025,
    fourier_max: 40,
    branch_max: 8,
};

fn read_operator(r: &mut Reader, d: &OperatorDefaults) -> Result<OperatorSpec, ConfigError> {
    let family = match r.opt_str("family") {
        None => d.family,
        Some(s) => Family::parse(&s).ok_or_else(|| {
            r.error("family", format!("expected grushin_rectangle, grushin_torus or elliptic, got {s:?}"))
        })?,
    };
    let gamma_default = if family == Family::Elliptic { 0 } else { 1 };
    let spec = OperatorSpec {
        family,
        gamma: r.int("gamma", gamma_default)?,
        grid_n: r.int("grid_n", d.grid_n)?,
        fourier_max: r.int("fourier_max", d.fourier_max)?,
        branch_max: r.int("branch_max", d.branch_max)?,
        lambda_cutoff: r.opt_f64("lambda_cutoff")?,
    };
    spec.validate().map_err(|e| match e {
        hypolab::spectral::SpectralError::InvalidSpec { field, reason } => r.error(field, reason),
        other => r.error("operator", other.to_string()),
    })?;
    Ok(spec)
}

fn read_region(r: &mut Reader) -> Result<ObservationRegion, ConfigError> {
    let (x1, x2, t) = DEFAULT_REGION;
    let x1 = r.pair("x1_range", x1)?;
    let x2 = r.pair("x2_range", x2)?;
    let t = r.pair("t_range", t)?;
    for (key, (lo, hi), bounds) in [("x1_range", x1, (-1.0, 1.0)), ("x2_range", x2, (0.0, 1.0))] {
        if !(bounds.0 <= lo && lo < hi && hi <= bounds.1) {
            return Err(r.error(key, format!("must satisfy {} ≤ lo < hi ≤ {}, got {lo},{hi}", bounds.0, bounds.1)));
        }
    }
    ObservationRegion::new(x1, x2, t).map_err(|e| r.error("t_range", e.to_string()))
}

/// Observation time `T` of a heat window `(0, T)`.
fn heat_time(r: &Reader, region: &ObservationRegion) -> Result<f64, ConfigError> {
    if region.t_range.0 != 0.0 {
        return Err(r.error("t_range", "heat observation windows must start at 0"));
    }
    Ok(region.t_range.1)
}

fn half_decades(lo: i32, hi: i32) -> Vec<f64> {
    (2 * lo..=2 * hi).map(|k| 10f64.powf(f64::from(k) / 2.0)).collect()
}

/// Validates everything an experiment needs before any computation starts.
pub fn build_config(experiment: Experiment, mut r: Reader, over: Overrides) -> Result<ExperimentConfig, ConfigError> {
    if let Some(named) = r.opt_str("experiment") {
        if Experiment::parse(&named) != Some(experiment) {
            return Err(r.error(
                "experiment",
                format!("file is for {named:?} but the subcommand runs {}", experiment.key()),
            ));
        }
    }
    let output_dir = PathBuf::from(r.string("output_dir", "out"));
    let seed = match over.seed {
        Some(s) => {
            let _ = r.opt_int::<u64>("seed")?;
            s
        }
        None => r.int("seed", 0u64)?,
    };
    let threads = match over.threads {
        Some(t) => {
            let _ = r.opt_int::<usize>("threads")?;
            Some(t)
        }
        None => r.opt_int::<usize>("threads")?,
    };
    if threads == Some(0) {
        return Err(r.error("threads", "must be at least 1"));
    }

    let mut tol_defaults: &[(&str, f64)] = &[];
    let job = match experiment {
        Experiment::Spectrum => {
            tol_defaults = &[("closed_form_rel", 1e-6)];
            Job::Spectrum {
                spec: read_operator(&mut r, &OPERATOR_DEFAULTS)?,
            }
        }
        Experiment::Tunneling => {
            tol_defaults = &[("exponent_rel", 0.10)];
            let spec = read_operator(&mut r, &OPERATOR_DEFAULTS)?;
            let region = read_region(&mut r)?;
            let n_min: Option<u64> = r.opt_int("n_min")?;
            let n_max: Option<u64> = r.opt_int("n_max")?;
            let n_step: Option<u64> = r.opt_int("n_step")?;
            let levels = if n_min.is_some() || n_max.is_some() || n_step.is_some() {
                let (lo, hi, step) = (n_min.unwrap_or(1), n_max.unwrap_or(spec.fourier_max as u64), n_step.unwrap_or(1));
                if lo < 1 {
                    return Err(r.error("n_min", "must be at least 1"));
                }
                if hi < lo || hi > spec.fourier_max as u64 {
                    return Err(r.error("n_max", format!("must lie in [n_min, fourier_max = {}]", spec.fourier_max)));
                }
                if step < 1 {
                    return Err(r.error("n_step", "must be at least 1"));
                }
                Some((lo..=hi).step_by(step as usize).collect::<Vec<_>>())
            } else {
                None
            };
            if spec.family == Family::Elliptic || spec.gamma < 1 {
                return Err(r.error("gamma", "tunneling needs a degenerate operator, gamma ≥ 1"));
            }
            if levels.as_ref().map_or(spec.fourier_max, Vec::len) < 3 {
                return Err(r.error("n_max", "need at least 3 Fourier levels to fit"));
            }
            Job::Tunneling { spec, region, levels }
        }
        Experiment::Geodesics => {
            tol_defaults = &[("drift", 1e-8)];
            let system = match r.string("system", "grushin").as_str() {
                "grushin" => SrSystem::grushin(r.int("gamma", 1)?),
                "heisenberg" => SrSystem::heisenberg(),
                "elliptic" => {
                    let d: usize = r.int("dim", 2)?;
                    SrSystem::elliptic(d).map_err(|e| r.error("dim", e.to_string()))?
                }
                other => {
                    return Err(r.error("system", format!("expected grushin, heisenberg or elliptic, got {other:?}")));
                }
            };
            let d = system.dim();
            let x0 = r.list("x0", &vec![0.25; d])?;
            let xi0 = r.list("xi0", &(0..d).map(|i| 1.0 / (i + 1) as f64).collect::<Vec<_>>())?;
            for (key, v) in [("x0", &x0), ("xi0", &xi0)] {
                if v.len() != d {
                    return Err(r.error(key, format!("needs {d} components, got {}", v.len())));
                }
            }
            let start = CotangentState::new(x0, xi0).map_err(|e| r.error("xi0", e.to_string()))?;
            if !(hamiltonian(&system, &start) > 0.0) {
                return Err(r.error("xi0", "covector annihilates every field: ℓ = 0"));
            }
            let length = r.positive("length", 5.0)?;
            let step = r.positive("step", 1e-3)?;
            let lo = r.list("omega_lo", &[])?;
            let hi = r.list("omega_hi", &[])?;
            let shots: usize = r.int("shots", ShootingOptions::default().shots)?;
            let s_max = r.positive("s_max", ShootingOptions::default().s_max)?;
            let target = match (lo.is_empty(), hi.is_empty()) {
                (true, true) => None,
                (false, false) => {
                    let b = BoxRegion::new(lo, hi).map_err(|e| r.error("omega_hi", e.to_string()))?;
                    if b.dim() != d {
                        return Err(r.error("omega_lo", format!("target box needs {d} components")));
                    }
                    Some((b, ShootingOptions { shots, s_max, step }))
                }
                _ => return Err(r.error("omega_lo", "omega_lo and omega_hi go together")),
            };
            Job::Geodesics {
                system,
                start,
                length,
                step,
                target,
            }
        }
        Experiment::Transmute => {
            tol_defaults = &[("ratio", 0.15), ("correction", 0.1)];
            let t = r.positive("transmute_t", 1.0)?;
            let s = r.positive("transmute_s", 0.5)?;
            let params = match r.opt_f64("transmute_alpha")? {
                Some(a) => TransmuteParams::new(t, s, a).map_err(|e| r.error("transmute_alpha", e.to_string()))?,
                None => TransmuteParams::with_default_alpha(t, s).map_err(|e| r.error("transmute_s", e.to_string()))?,
            };
            let lambdas = r.ascending("lambdas", &half_decades(2, 5))?;
            if lambdas[0] <= 0.0 || lambdas.len() < 3 {
                return Err(r.error("lambdas", "need at least 3 positive values"));
            }
            Job::Transmute { params, lambdas }
        }
        Experiment::LowfreqCost => {
            let spec = read_operator(&mut r, &OPERATOR_DEFAULTS)?;
            let region = read_region(&mut r)?;
            heat_time(&r, &region)?;
            let grid = r.ascending("lambda_grid", &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0])?;
            if grid.len() < 4 || grid[0] <= 0.0 {
                return Err(r.error("lambda_grid", "need at least 4 positive levels"));
            }
            Job::LowfreqCost { spec, region, grid }
        }
        Experiment::Parabolic => {
            let spec = read_operator(&mut r, &OPERATOR_DEFAULTS)?;
            let region = read_region(&mut r)?;
            let t_list = r.ascending("t_list", &[0.0125, 0.025, 0.05, 0.1, 0.2])?;
            if t_list[0] <= 0.0 || t_list.len() < 2 {
                return Err(r.error("t_list", "need at least 2 positive times"));
            }
            let mut opts = ParabolicOptions::new(t_list, r.positive("lambda_max", 120.0)?);
            opts.eta = r.positive("eta", opts.eta)?;
            opts.d = r.positive("d", opts.d)?;
            opts.random_count = r.int("random_count", opts.random_count)?;
            opts.seed = seed;
            Job::Parabolic { spec, region, opts }
        }
        Experiment::Gevrey => {
            let spec = read_operator(&mut r, &OPERATOR_DEFAULTS)?;
            let region = read_region(&mut r)?;
            let t = heat_time(&r, &region)?;
            let thetas = r.ascending("thetas", &[0.06, 0.08, 0.12, 0.2, 0.4])?;
            let theta0 = r.positive("theta0", 0.045)?;
            if thetas[0] <= theta0 {
                return Err(r.error("thetas", format!("every theta must exceed theta0 = {theta0}")));
            }
            let mut opts = GevreyOptions::new(t, thetas, theta0, r.positive("lambda_low", 40.0)?);
            opts.random_count = r.int("random_count", opts.random_count)?;
            opts.seed = seed;
            Job::Gevrey { spec, region, opts }
        }
        Experiment::FrequencyCost => {
            let spec = read_operator(&mut r, &OPERATOR_DEFAULTS)?;
            let region = read_region(&mut r)?;
            let t = heat_time(&r, &region)?;
            let opts = FrequencyOptions {
                t,
                samples: r.int("samples", 200)?,
                bins: r.int("bins", 10)?,
                lambda_max: r.positive("lambda_max", 120.0)?,
                seed,
            };
            if opts.bins < 2 {
                return Err(r.error("bins", "need at least 2 bins"));
            }
            Job::FrequencyCost { spec, region, opts }
        }
        Experiment::Subelliptic => {
            tol_defaults = &[("band_change", 0.5)];
            let defaults = OperatorDefaults {
                family: Family::GrushinTorus,
                grid_n: 129,
                fourier_max: 1,
                branch_max: 1,
            };
            let spec = read_operator(&mut r, &defaults)?;
            if spec.family != Family::GrushinTorus {
                return Err(r.error("family", "subelliptic ratios need grushin_torus"));
            }
            let bands: u32 = r.int("bands", 5)?;
            let q_base: u32 = r.int("q_base", 8)?;
            let trials: usize = r.int("trials", 200)?;
            if bands < 2 {
                return Err(r.error("bands", "need at least 2 bands"));
            }
            if q_base < 1 || u64::from(q_base) << bands > u64::from(u32::MAX) {
                return Err(r.error("q_base", "must be at least 1 and keep q_base·2^bands in range"));
            }
            if trials < 1 {
                return Err(r.error("trials", "must be at least 1"));
            }
            Job::Subelliptic {
                spec,
                bands,
                q_base,
                trials,
            }
        }
        Experiment::AcceptAll => {
            let all = criterion_ids();
            let picked = r.list("criteria", &all.iter().map(|&c| f64::from(c)).collect::<Vec<_>>())?;
            let mut criteria = Vec::with_capacity(picked.len());
            for c in picked {
                if c.fract() != 0.0 || !all.iter().any(|&a| f64::from(a) == c) {
                    return Err(r.error("criteria", format!("no acceptance criterion {c}")));
                }
                criteria.push(c as u8);
            }
            Job::AcceptAll { criteria }
        }
    };
    let tolerances = r.tolerances(tol_defaults)?;
    r.finish(experiment.key())?;
    Ok(ExperimentConfig {
        experiment,
        output_dir: over.output_dir.unwrap_or(output_dir),
        seed,
        threads,
        tolerances,
        job,
    })
}

/// Files and verdicts of one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: String,
    pub json: Map<String, Value>,
    /// Failed acceptance criteria; only `accept_all` fills it.
    pub failed: Vec<String>,
}

fn tol(cfg: &ExperimentConfig, name: &str) -> f64 {
    cfg.tolerances
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| *v)
        .expect("tolerance declared by the experiment")
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

fn basis_for(spec: &OperatorSpec) -> Result<SpectralBasis, RunError> {
    build_basis(spec).map_err(numerical("spectral", "build_basis"))
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    let mut failed = Vec::new();
    let (csv, mut json) = match &cfg.job {
        Job::Spectrum { spec } => {
            let b = basis_for(spec)?;
            let mut csv = String::from("index,n,branch,x2,lambda\n");
            for (i, m) in b.modes().iter().enumerate() {
                let x2 = match m.x2 {
                    X2Mode::Sine(_) => "sin",
                    X2Mode::Cosine(_) => "cos",
                    X2Mode::Constant => "const",
                };
                let _ = writeln!(csv, "{i},{},{},{x2},{}", m.fourier_n, m.branch, g17(m.lambda));
            }
            let mut m = Map::new();
            m.insert("modes".into(), b.len().into());
            m.insert("lambda_min".into(), number(b.modes()[0].lambda));
            m.insert("lambda_max".into(), number(b.modes()[b.len() - 1].lambda));
            m.insert("family".into(), spec.family.as_str().into());
            m.insert("gamma".into(), spec.gamma.into());
            m.insert("grid_n".into(), spec.grid_n.into());
            m.insert("fourier_max".into(), spec.fourier_max.into());
            m.insert("branch_max".into(), spec.branch_max.into());
            if spec.gamma == 0 && spec.family != Family::GrushinTorus {
                // Dirichlet Laplacian on [−1,1]×[0,1]
                let worst = b
                    .modes()
                    .iter()
                    .map(|m| {
                        let exact = (m.branch as f64 * std::f64::consts::FRAC_PI_2).powi(2)
                            + (m.fourier_n as f64 * std::f64::consts::PI).powi(2);
                        (m.lambda / exact - 1.0).abs()
                    })
                    .fold(0.0, f64::max);
                m.insert("closed_form_max_rel_error".into(), number(worst));
                m.insert("pass_closed_form".into(), (worst <= tol(cfg, "closed_form_rel")).into());
            }
            (csv, m)
        }
        Job::Tunneling { spec, region, levels } => {
            let b = match levels {
                Some(l) => build_basis_for(spec, l).map_err(numerical("spectral", "build_basis_for"))?,
                None => basis_for(spec)?,
            };
            let rep = tunneling_experiment(&b, region, None).map_err(numerical("observability", "tunneling"))?;
            let mut m = object(rep.to_json());
            if spec.gamma == 1 {
                let a = region.distance_to_singular_line();
                let target = a * a;
                m.insert("target_exponent".into(), number(target));
                let ok = target > 0.0 && (rep.raw_fit.slope / target - 1.0).abs() <= tol(cfg, "exponent_rel");
                m.insert("pass_exponent".into(), ok.into());
            }
            (rep.to_csv(), m)
        }
        Job::Geodesics {
            system,
            start,
            length,
            step,
            target,
        } => {
            let path = flow_geodesic(system, start, *length, *step).map_err(numerical("geometry", "flow_geodesic"))?;
            let drift = path.max_hamiltonian_drift(system);
            let mut m = Map::new();
            m.insert("system".into(), system.name().into());
            m.insert("ell0".into(), number(path.ell0));
            m.insert("length".into(), number(*length));
            m.insert("step".into(), number(*step));
            m.insert("samples".into(), path.samples.len().into());
            m.insert("max_hamiltonian_drift".into(), number(drift));
            m.insert("pass_drift".into(), (drift <= tol(cfg, "drift")).into());
            let arc = path_length(system, &path).map_err(numerical("geometry", "path_length"))?;
            m.insert("path_length".into(), number(arc));
            if let Some((omega, opts)) = target {
                let (d, _) = distance_to_set(system, &start.x, omega, opts)
                    .map_err(numerical("geometry", "distance_to_set"))?;
                m.insert("distance_to_target".into(), number(d));
                m.insert("shots".into(), opts.shots.into());
            }
            (path.to_csv(system), m)
        }
        Job::Transmute { params, lambdas } => {
            let rows = lambda_sweep(params, lambdas).map_err(numerical("transmutation", "lambda_sweep"))?;
            let fit = correction_exponent(&rows).map_err(numerical("transmutation", "correction_exponent"))?;
            let last = rows[rows.len() - 1];
            let gap = (last.ratio - 1.0).abs();
            let mut m = Map::new();
            m.insert("T".into(), number(params.t));
            m.insert("S".into(), number(params.s));
            m.insert("alpha".into(), number(params.alpha));
            m.insert("lambda_top".into(), number(last.lambda));
            m.insert("ratio_gap_at_top".into(), number(gap));
            m.insert("correction_exponent".into(), number(fit.slope));
            m.insert("correction_r_squared".into(), number(fit.r_squared));
            m.insert("target_correction_exponent".into(), number(-0.25));
            m.insert("pass_ratio".into(), (gap <= tol(cfg, "ratio")).into());
            m.insert("pass_correction".into(), ((fit.slope + 0.25).abs() <= tol(cfg, "correction")).into());
            (sweep_csv(&rows), m)
        }
        Job::LowfreqCost { spec, region, grid } => {
            let b = basis_for(spec)?;
            let t = region.t_range.1;
            let rep = lowfreq_cost_experiment(&b, region, t, grid).map_err(numerical("observability", "lowfreq_cost"))?;
            let mut m = object(rep.to_json());
            m.insert("pass_positive_exponent".into(), (rep.fitted_exponent > 0.0).into());
            (rep.to_csv(), m)
        }
        Job::Parabolic { spec, region, opts } => {
            let b = basis_for(spec)?;
            let rep = parabolic_tradeoff_experiment(&b, region, opts)
                .map_err(numerical("observability", "parabolic_tradeoff"))?;
            (rep.to_csv(), object(rep.to_json()))
        }
        Job::Gevrey { spec, region, opts } => {
            let b = Arc::new(basis_for(spec)?);
            let rep = gevrey_cost_experiment(&b, region, opts).map_err(numerical("observability", "gevrey_cost"))?;
            (rep.to_csv(), object(rep.to_json()))
        }
        Job::FrequencyCost { spec, region, opts } => {
            let b = Arc::new(basis_for(spec)?);
            let rep =
                frequency_cost_experiment(&b, region, opts).map_err(numerical("observability", "frequency_cost"))?;
            (rep.to_csv(), object(rep.to_json()))
        }
        Job::Subelliptic {
            spec,
            bands,
            q_base,
            trials,
        } => {
            let mut csv = String::from("band,q_lo,q_hi,trials,max_ratio,mean_ratio\n");
            let mut maxima = Vec::new();
            for b in 0..*bands {
                let band = (q_base << b, q_base << (b + 1));
                let r = subelliptic_ratio(spec, band, *trials, cfg.seed + u64::from(b))
                    .map_err(numerical("spectral", "subelliptic_ratio"))?;
                let max = r.iter().cloned().fold(0.0, f64::max);
                let mean = r.iter().sum::<f64>() / r.len() as f64;
                let _ = writeln!(csv, "{b},{},{},{},{},{}", band.0, band.1, r.len(), g17(max), g17(mean));
                maxima.push(max);
            }
            let change = maxima
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() / w[0].min(w[1]))
                .fold(0.0, f64::max);
            let mut m = Map::new();
            m.insert("gamma".into(), spec.gamma.into());
            m.insert("band_maxima".into(), Value::Array(maxima.iter().map(|x| number(*x)).collect()));
            m.insert("largest_adjacent_change".into(), number(change));
            m.insert("pass_band_change".into(), (change < tol(cfg, "band_change")).into());
            (csv, m)
        }
        Job::AcceptAll { criteria } => {
            let mut csv = String::from("id,title,passed,detail\n");
            let mut m = Map::new();
            let mut passed = 0usize;
            for &id in criteria {
                let o = run_criterion(id).expect("criterion ids validated at parse time");
                println!("{}", o.line());
                let _ = writeln!(csv, "{},{},{},{}", o.id, csv_quote(o.title), o.passed, csv_quote(&o.detail));
                m.insert(format!("pass_{:02}", o.id), o.passed.into());
                m.insert(format!("elapsed_{:02}", o.id), number(o.elapsed.as_secs_f64()));
                if o.passed {
                    passed += 1;
                } else {
                    failed.push(format!("{} ({})", o.id, o.title));
                }
            }
            m.insert("criteria".into(), criteria.len().into());
            m.insert("passed".into(), passed.into());
            m.insert("failed".into(), Value::Array(failed.iter().map(|f| f.as_str().into()).collect()));
            (csv, m)
        }
    };
    json.insert("experiment".into(), cfg.experiment.key().into());
    json.insert("seed".into(), cfg.seed.into());
    json.insert("hypolab_version".into(), env!("CARGO_PKG_VERSION").into());
    for (name, v) in &cfg.tolerances {
        json.insert(format!("tol_{name}"), number(*v));
    }
    Ok(Artifacts { csv, json, failed })
}
