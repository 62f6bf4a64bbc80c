use super::NumericsError;

const RK45_MAX_SUBSTEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeMethod {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4,
    /// Dormand-Prince 5(4) with error control between output samples.
    Rk45 { rtol: f64, atol: f64 },
}

/// States sampled at uniformly spaced parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// One classical RK4 step of size `h` from `(s, y)`, written into `out`.
pub fn rk4_step<F>(rhs: &F, s: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(s, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(s + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(s + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(s + h, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate `y' = rhs(s, y)` over `span`, returning samples every `step`
/// (the step is shrunk slightly so that the span is covered by whole steps).
pub fn integrate_ode<F>(
    rhs: F,
    y0: &[f64],
    span: (f64, f64),
    step: f64,
    method: OdeMethod,
) -> Result<Trajectory, NumericsError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let (s0, s1) = span;
    if !(step > 0.0) || !step.is_finite() {
        return Err(NumericsError::InvalidInput(format!("ODE step must be positive, got {step}")));
    }
    if !(s1 >= s0) || !s0.is_finite() || !s1.is_finite() {
        return Err(NumericsError::InvalidInput(format!("invalid span ({s0}, {s1})")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFiniteState { s: s0 });
    }
    let steps = (((s1 - s0) / step) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { (s1 - s0) / steps as f64 };

    let mut traj = Trajectory {
        s: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    traj.s.push(s0);
    traj.states.push(y0.to_vec());
    let mut y = y0.to_vec();
    let mut next = vec![0.0; y.len()];
    let mut dp = DormandPrince::new(y.len());
    let mut h_adapt = h;
    for k in 0..steps {
        let s = s0 + k as f64 * h;
        let s_next = if k + 1 == steps { s1 } else { s0 + (k + 1) as f64 * h };
        match method {
            OdeMethod::Rk4 => rk4_step(&rhs, s, &y, s_next - s, &mut next),
            OdeMethod::Rk45 { rtol, atol } => {
                next.copy_from_slice(&y);
                dp.advance(&rhs, s, s_next, &mut next, &mut h_adapt, rtol, atol)?;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFiniteState { s: s_next });
        }
        std::mem::swap(&mut y, &mut next);
        traj.s.push(s_next);
        traj.states.push(y.clone());
    }
    Ok(traj)
}

struct DormandPrince {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y5: Vec<f64>,
}

impl DormandPrince {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    fn new(n: usize) -> Self {
        DormandPrince {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y5: vec![0.0; n],
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[allow(clippy::needless_range_loop)]
    fn advance<F>(
        &mut self,
        rhs: &F,
        mut s: f64,
        s_end: f64,
        y: &mut [f64],
        h: &mut f64,
        rtol: f64,
        atol: f64,
    ) -> Result<(), NumericsError>
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let mut substeps = 0;
        while s < s_end {
            substeps += 1;
            if substeps > RK45_MAX_SUBSTEPS {
                return Err(NumericsError::StepBudget { s });
            }
            let hh = h.min(s_end - s);
            for stage in 0..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in Self::A[stage].iter().enumerate().take(stage) {
                        acc += hh * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                rhs(s + Self::C[stage] * hh, &self.tmp, &mut self.k[stage]);
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut y5 = y[i];
                let mut y4 = y[i];
                for j in 0..7 {
                    y5 += hh * Self::B5[j] * self.k[j][i];
                    y4 += hh * Self::B4[j] * self.k[j][i];
                }
                self.y5[i] = y5;
                let sc = atol + rtol * y[i].abs().max(y5.abs());
                err = err.max(((y5 - y4) / sc).abs());
            }
            if !err.is_finite() {
                return Err(NumericsError::NonFiniteState { s });
            }
            if err <= 1.0 {
                s = if hh == s_end - s { s_end } else { s + hh };
                y.copy_from_slice(&self.y5);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            *h = hh * fac;
            if *h < 1e-14 * s_end.abs().max(1.0) {
                return Err(NumericsError::StepBudget { s });
            }
        }
        Ok(())
    }
}
