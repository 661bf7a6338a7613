//! L-stable two-stage SDIRK integration for stiff generators.
//!
//! The full five-level model mixes GHz-scale detunings with kHz-scale
//! entangling dynamics. No explicit method gets through that in reasonable
//! time, so the stiff tier is advanced with Alexander's second-order SDIRK
//! scheme. Each stage solve `(I - gamma h L) k = r` runs GMRES preconditioned by
//! the exact inverse of the no-jump part (see `krylov`).

use super::explicit::{check_initial, check_times};
use super::krylov::{schur_for, solve_shifted, GmresOptions, GmresReport, Preconditioner};
use super::{remove_trace, symmetrize_vec, trace_of_vec, LiouvillianAction, Trajectory};
use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, ZERO};

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug)]
pub struct ImplicitOptions {
    /// Largest step; each output interval is split into equal steps no longer
    /// than this.
    pub max_step: f64,
    pub gmres_rtol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for ImplicitOptions {
    fn default() -> Self {
        Self {
            max_step: 0.05,
            gmres_rtol: 1e-11,
            gmres_restart: 40,
            gmres_max_iter: 400,
        }
    }
}

/// Implicit counterpart of [`integrate_with`](super::integrate_with). Returns
/// the number of steps taken.
pub fn integrate_implicit(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    times: &[f64],
    opts: ImplicitOptions,
    mut observer: impl FnMut(f64, &ComplexMatrix) -> Result<()>,
) -> Result<usize> {
    check_times(times)?;
    check_initial(action, rho0)?;
    if !(opts.max_step > 0.0) {
        return Err(Error::InvalidParams("implicit step must be positive".into()));
    }
    let dim = action.dim();
    let n = dim * dim;
    let gm = GmresOptions {
        restart: opts.gmres_restart,
        max_iter: opts.gmres_max_iter,
        rtol: opts.gmres_rtol,
    };
    let mut prec = Preconditioner::for_shifted(action, 0.0, schur_for(action)?);
    let mut current_tau = f64::NAN;

    let mut y = rho0.vec_stack()?;
    symmetrize_vec(&mut y, dim);
    let trace0 = trace_of_vec(&y, dim);
    observer(times[0], rho0)?;

    let mut rhs = vec![ZERO; n];
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut stage = vec![ZERO; n];
    let mut steps = 0;

    for w in times.windows(2) {
        let interval = w[1] - w[0];
        let count = (interval / opts.max_step).ceil().max(1.0) as usize;
        let h = interval / count as f64;
        let tau = GAMMA * h;
        if tau != current_tau {
            prec.set_tau(action, tau);
            current_tau = tau;
        }
        for s in 0..count {
            let t = w[0] + s as f64 * h;
            action.apply_vec(&y, &mut rhs);
            k1.copy_from_slice(&rhs);
            let report = solve_shifted(action, tau, &prec, &rhs, &mut k1, gm);
            if !report.converged {
                return Err(stage_failure(t, report));
            }
            remove_trace(&mut k1, dim);
            for ((st, yi), ki) in stage.iter_mut().zip(&y).zip(&k1) {
                *st = yi + ki * (h * (1.0 - GAMMA));
            }
            action.apply_vec(&stage, &mut rhs);
            k2.copy_from_slice(&k1);
            let report = solve_shifted(action, tau, &prec, &rhs, &mut k2, gm);
            if !report.converged {
                return Err(stage_failure(t, report));
            }
            remove_trace(&mut k2, dim);
            for ((yi, a), b) in y.iter_mut().zip(&k1).zip(&k2) {
                *yi += a * (h * (1.0 - GAMMA)) + b * (h * GAMMA);
            }
            symmetrize_vec(&mut y, dim);
            steps += 1;
        }
        observer(w[1], &ComplexMatrix::unvec(&y)?)?;
    }
    let drift = (trace_of_vec(&y, dim) - trace0).norm();
    if drift > 1e-9 {
        return Err(Error::InvalidDensityMatrix(format!("trace drifted by {drift:e}")));
    }
    Ok(steps)
}

fn stage_failure(t: f64, report: GmresReport) -> Error {
    Error::NotConverged(format!(
        "implicit stage solve at t = {t} stalled at relative residual {:e} after {} iterations",
        report.relative_residual, report.iterations
    ))
}

/// Collects an implicit run into a [`Trajectory`].
pub fn integrate_implicit_trajectory(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    times: &[f64],
    opts: ImplicitOptions,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(times.len());
    let steps = integrate_implicit(action, rho0, times, opts, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegrateOptions, LindbladModel};
    use crate::operator::{destroy, SparseMatrix, TensorSpace};

    fn driven_cavity() -> LiouvillianAction {
        let space = TensorSpace::new(vec![2, 4]).unwrap();
        let a = destroy(3);
        let sm = ComplexMatrix::unit(2, 1, 0);
        let h = space.embed_sparse(&[(0, &sm.dagger()), (1, &a)]).unwrap().scale_real(1.5);
        let drive = space.embed_sparse(&[(0, &(&sm + &sm.dagger()))]).unwrap().scale_real(0.8);
        let h = h.add(&h.dagger()).add(&drive);
        LindbladModel::new(h)
            .unwrap()
            .with_jump(space.embed_sparse(&[(1, &a)]).unwrap().scale_real(1.2))
            .unwrap()
            .with_jump(SparseMatrix::from_dense(&space.embed_at(&sm, 0).unwrap()).scale_real(0.3))
            .unwrap()
            .into_action()
    }

    #[test]
    fn agrees_with_explicit_integration() {
        let action = driven_cavity();
        let rho0 = ComplexMatrix::unit(8, 0, 0);
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
        let reference = integrate(
            &action,
            &rho0,
            &times,
            IntegrateOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap();
        let opts = ImplicitOptions {
            max_step: 0.005,
            ..Default::default()
        };
        let traj = integrate_implicit_trajectory(&action, &rho0, &times, opts).unwrap();
        for (a, b) in traj.states.iter().zip(&reference.states) {
            assert!((a - b).max_abs() < 2e-5, "{}", (a - b).max_abs());
        }
        traj.validate().unwrap();
    }

    #[test]
    fn second_order_convergence() {
        let action = driven_cavity();
        let rho0 = ComplexMatrix::unit(8, 0, 0);
        let times = [0.0, 2.0];
        let reference = integrate(
            &action,
            &rho0,
            &times,
            IntegrateOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                ..Default::default()
            },
        )
        .unwrap();
        let err = |h: f64| {
            let opts = ImplicitOptions {
                max_step: h,
                ..Default::default()
            };
            let traj = integrate_implicit_trajectory(&action, &rho0, &times, opts).unwrap();
            (traj.final_state() - reference.final_state()).max_abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.0..5.0).contains(&ratio), "error ratio {ratio}");
    }
}
