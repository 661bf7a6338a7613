//! Adaptive Dormand-Prince 5(4) integration.

use super::{symmetrize_vec, trace_of_vec, LiouvillianAction};
use crate::error::{Error, Result};
use crate::metrics::check_density_matrix;
use crate::operator::{hermitian_eigen, ComplexMatrix, C64, ZERO};

#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step count budget for the whole run.
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 5_000_000,
        }
    }
}

/// States at the requested output times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    /// Accepted integrator steps.
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &ComplexMatrix {
        self.states.last().expect("a trajectory has at least one state")
    }

    /// Checks trace and hermiticity of every state to 1e-9 and, for spaces of
    /// dimension up to 64, that no eigenvalue falls below -1e-7.
    pub fn validate(&self) -> Result<()> {
        for (t, rho) in self.times.iter().zip(&self.states) {
            let tr = rho.trace();
            if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
                return Err(Error::InvalidDensityMatrix(format!("trace {tr} at t = {t}")));
            }
            let defect = rho.hermiticity_defect();
            if defect > 1e-9 {
                return Err(Error::InvalidDensityMatrix(format!("hermiticity defect {defect:e} at t = {t}")));
            }
            if rho.rows() <= 64 {
                let min = hermitian_eigen(rho)?.values[0];
                if min < -1e-7 {
                    return Err(Error::InvalidDensityMatrix(format!("eigenvalue {min:e} at t = {t}")));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParams("no output times".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("output times must be finite and strictly ascending".into()));
    }
    Ok(())
}

pub(crate) fn check_initial(action: &LiouvillianAction, rho0: &ComplexMatrix) -> Result<()> {
    if rho0.rows() != action.dim() || rho0.cols() != action.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", action.dim()),
            actual: format!("{}x{}", rho0.rows(), rho0.cols()),
        });
    }
    check_density_matrix(rho0)
}

/// Integrates from `rho0` at `times[0]` and returns the state at every time.
pub fn integrate(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    times: &[f64],
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(times.len());
    let steps = integrate_with(action, rho0, times, opts, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        steps,
    })
}

// Dormand-Prince tableau; the generator is time-independent so the nodes are
// not needed.
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Like [`integrate`] but hands each output state to `observer` instead of
/// storing it. Returns the number of accepted steps.
///
/// Steps are shortened to land exactly on output times. Every accepted state
/// is re-symmetrized to remove the anti-hermitian rounding drift.
pub fn integrate_with(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    times: &[f64],
    opts: IntegrateOptions,
    mut observer: impl FnMut(f64, &ComplexMatrix) -> Result<()>,
) -> Result<usize> {
    check_times(times)?;
    check_initial(action, rho0)?;
    let dim = action.dim();
    let n = dim * dim;
    let mut y = rho0.vec_stack()?;
    symmetrize_vec(&mut y, dim);
    observer(times[0], rho0)?;

    let scale = action.rate_scale();
    let span = times[times.len() - 1] - times[0];
    let mut h = if scale > 0.0 { (0.5 / scale).min(span) } else { span };
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    action.apply_vec(&y, &mut k[0]);
    let mut t = times[0];
    let mut steps = 0;

    for &t_out in &times[1..] {
        while t < t_out {
            let remaining = t_out - t;
            let landing = h >= remaining;
            let h_try = if landing { remaining } else { h };
            if h_try < 1e-14 * t.abs().max(span).max(1e-300) {
                return Err(Error::StepSizeUnderflow { t, h: h_try });
            }
            for s in 1..7 {
                stage.copy_from_slice(&y);
                for (j, a) in A[s].iter().enumerate() {
                    if *a != 0.0 {
                        let ha = h_try * a;
                        for (st, kj) in stage.iter_mut().zip(&k[j]) {
                            *st += kj * ha;
                        }
                    }
                }
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
                action.apply_vec(&stage, &mut k[s]);
            }
            let mut err_sq = 0.0;
            for i in 0..n {
                let e: C64 = (0..7).map(|s| k[s][i] * E[s]).sum::<C64>() * h_try;
                let sc = opts.abs_tol + opts.rel_tol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { t, h: h_try });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if landing { t_out } else { t + h_try };
                symmetrize_vec(&mut y_new, dim);
                std::mem::swap(&mut y, &mut y_new);
                action.apply_vec(&y, &mut k[0]);
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::NotConverged(format!(
                        "step budget of {} exhausted at t = {t}",
                        opts.max_steps
                    )));
                }
                // A step clipped to land on an output time says nothing about
                // the achievable step size.
                if !landing || factor < 1.0 {
                    h = h_try * factor;
                }
            } else {
                h = h_try * factor;
            }
        }
        observer(t_out, &ComplexMatrix::unvec(&y)?)?;
    }
    let drift = (trace_of_vec(&y, dim) - trace_of_vec(&rho0.vec_stack()?, dim)).norm();
    if drift > 1e-9 {
        return Err(Error::InvalidDensityMatrix(format!("trace drifted by {drift:e}")));
    }
    Ok(steps)
}
