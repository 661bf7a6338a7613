//! Steady-state solvers and the Liouvillian spectral gap.

use nalgebra::DMatrix;

use super::explicit::check_initial;
use super::krylov::{schur_for, solve_shifted, GmresOptions, Preconditioner};
use super::{
    integrate_implicit, integrate_with, norm, symmetrize_vec, trace_of_vec, ImplicitOptions, IntegrateOptions,
    LiouvillianAction,
};
use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, C64, ZERO};

/// Largest dimension [`steady_state`] hands to the dense null-space solver.
pub const NULLSPACE_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyMethod {
    Nullspace,
    Longtime,
    Inverse,
}

#[derive(Clone, Debug)]
pub struct SteadyOutcome {
    pub state: ComplexMatrix,
    pub method: SteadyMethod,
    /// `||L rho||_F / rate_scale` at the returned state.
    pub residual: f64,
    /// Model time integrated, for the long-time solver.
    pub model_time: Option<f64>,
    /// Outer iterations or integration windows used.
    pub iterations: usize,
}

fn dense(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

fn superop_dim(superop: &ComplexMatrix) -> Result<usize> {
    let n2 = superop.require_square()?;
    let dim = (n2 as f64).sqrt().round() as usize;
    if dim * dim != n2 {
        return Err(Error::DimensionMismatch {
            expected: "a superoperator of size dim^2".into(),
            actual: n2.to_string(),
        });
    }
    Ok(dim)
}

/// Unique trace-one `rho` with `L vec(rho) = 0`, from a dense superoperator.
///
/// The null vector is the right singular vector of the smallest singular
/// value. Fails when a second singular value is within `1e-10 ||L||` of zero.
pub fn steady_state_nullspace(superop: &ComplexMatrix) -> Result<ComplexMatrix> {
    superop_dim(superop)?;
    let svd = dense(superop).svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let largest = sv[order[order.len() - 1]];
    let (smallest, second) = (sv[order[0]], sv.get(order.get(1).copied().unwrap_or(0)).copied().unwrap_or(largest));
    if largest == 0.0 {
        return Err(Error::DegenerateSteadyState("the generator is zero".into()));
    }
    if smallest > 1e-8 * largest {
        return Err(Error::DegenerateSteadyState(format!(
            "no stationary state: smallest singular value {:e} of ||L|| = {largest:e}",
            smallest
        )));
    }
    if order.len() > 1 && second <= 1e-10 * largest {
        return Err(Error::DegenerateSteadyState(format!(
            "null space is not one-dimensional (second singular value {second:e}, ||L|| = {largest:e})"
        )));
    }
    let k = order[0];
    let v: Vec<C64> = (0..v_t.ncols()).map(|c| v_t[(k, c)].conj()).collect();
    let rho = ComplexMatrix::unvec(&v)?;
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::DegenerateSteadyState("null vector is traceless".into()));
    }
    let rho = rho.scale(tr.inv());
    let defect = rho.hermiticity_defect();
    if defect > 1e-10 * rho.max_abs().max(1.0) {
        return Err(Error::DegenerateSteadyState(format!("null vector not hermitian ({defect:e})")));
    }
    Ok(rho.hermitian_part())
}

/// Smallest `|Re lambda|` over the nonzero eigenvalues of a dense
/// superoperator. Eigenvalues come from a complex Schur decomposition.
pub fn spectral_gap(superop: &ComplexMatrix) -> Result<f64> {
    superop_dim(superop)?;
    let scale = superop.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::DegenerateSteadyState("the generator is zero".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(dense(superop), 1e-15, 10_000)
        .ok_or_else(|| Error::NotConverged("Schur decomposition of the superoperator".into()))?;
    let (_, t) = schur.unpack();
    let eig: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    let zero_tol = 1e-10 * scale;
    let zeros = eig.iter().filter(|l| l.norm() <= zero_tol).count();
    if zeros != 1 {
        return Err(Error::DegenerateSteadyState(format!(
            "{zeros} eigenvalues within {zero_tol:e} of zero"
        )));
    }
    Ok(eig
        .iter()
        .filter(|l| l.norm() > zero_tol)
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min))
}

/// Integrator used by [`steady_state_longtime`].
#[derive(Clone, Copy, Debug)]
pub enum Stepper {
    Explicit(IntegrateOptions),
    Implicit(ImplicitOptions),
}

#[derive(Clone, Copy, Debug)]
pub struct LongtimeOptions {
    /// Stop once `||L rho||_F <= tol * rate_scale`.
    pub tol: f64,
    /// Model-time budget.
    pub max_time: f64,
    pub stepper: Stepper,
}

impl Default for LongtimeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_time: 1e4,
            stepper: Stepper::Explicit(IntegrateOptions {
                rel_tol: 1e-10,
                abs_tol: 1e-12,
                ..Default::default()
            }),
        }
    }
}

fn residual(action: &LiouvillianAction, x: &[C64]) -> f64 {
    let mut out = vec![ZERO; x.len()];
    action.apply_vec(x, &mut out);
    let scale = action.rate_scale();
    if scale == 0.0 {
        0.0
    } else {
        norm(&out) / scale
    }
}

/// Integrates from `rho0` over doubling windows until the state stops moving.
pub fn steady_state_longtime(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    opts: LongtimeOptions,
) -> Result<SteadyOutcome> {
    check_initial(action, rho0)?;
    let scale = action.rate_scale();
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut window = if scale > 0.0 { 10.0 / scale } else { 1.0 };
    let mut windows = 0;
    loop {
        let r = residual(action, &rho.vec_stack()?);
        if r <= opts.tol {
            return Ok(SteadyOutcome {
                state: rho,
                method: SteadyMethod::Longtime,
                residual: r,
                model_time: Some(t),
                iterations: windows,
            });
        }
        if t >= opts.max_time {
            return Err(Error::NotConverged(format!(
                "no stationary state within {} us (residual {r:e}, target {:e}); \
                 relaxation slows as (a/b - 1)^-2 when a/b approaches 1",
                opts.max_time, opts.tol
            )));
        }
        let span = window.min(opts.max_time - t).max(f64::MIN_POSITIVE);
        let times = [t, t + span];
        let mut last = None;
        let keep = |tt: f64, state: &ComplexMatrix| {
            if tt == times[1] {
                last = Some(state.clone());
            }
            Ok(())
        };
        match opts.stepper {
            Stepper::Explicit(o) => integrate_with(action, &rho, &times, o, keep)?,
            Stepper::Implicit(o) => integrate_implicit(action, &rho, &times, o, keep)?,
        };
        rho = last.expect("observer sees the final time");
        t += span;
        window *= 2.0;
        windows += 1;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InverseOptions {
    /// Shift `h` of the inverse iteration `x <- (I - h L)^-1 x`, in model time.
    pub shift: f64,
    /// Stop once successive iterates differ by at most this (Frobenius).
    pub state_tol: f64,
    pub max_outer: usize,
    pub gmres_rtol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            shift: 1e4,
            state_tol: 1e-10,
            max_outer: 40,
            gmres_rtol: 1e-8,
            gmres_restart: 120,
            gmres_max_iter: 1200,
        }
    }
}

/// Shifted inverse iteration towards the zero eigenvalue.
///
/// Each step solves `(I - h L) y = x` with preconditioned GMRES and rescales
/// to unit trace. Components decaying at rate `lambda` shrink by
/// `1 / (1 + h lambda)` per step, so a large shift converges in a handful of
/// steps. Imperfect inner solves only slow the outer iteration down.
pub fn steady_state_inverse(
    action: &LiouvillianAction,
    rho0: &ComplexMatrix,
    opts: InverseOptions,
) -> Result<SteadyOutcome> {
    check_initial(action, rho0)?;
    let dim = action.dim();
    let h = opts.shift;
    let prec = Preconditioner::for_shifted(action, h, schur_for(action)?);
    let gm = GmresOptions {
        restart: opts.gmres_restart,
        max_iter: opts.gmres_max_iter,
        rtol: opts.gmres_rtol,
    };
    let mut x = rho0.vec_stack()?;
    let mut y = x.clone();
    for it in 1..=opts.max_outer {
        y.copy_from_slice(&x);
        solve_shifted(action, h, &prec, &x, &mut y, gm);
        let tr = trace_of_vec(&y, dim);
        if !(tr.norm() > 0.0) || !tr.re.is_finite() {
            return Err(Error::NotConverged("inverse iteration lost the trace".into()));
        }
        let inv = tr.inv();
        y.iter_mut().for_each(|v| *v *= inv);
        symmetrize_vec(&mut y, dim);
        let change = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut y);
        if change <= opts.state_tol {
            return Ok(SteadyOutcome {
                residual: residual(action, &x),
                state: ComplexMatrix::unvec(&x)?,
                method: SteadyMethod::Inverse,
                model_time: None,
                iterations: it,
            });
        }
    }
    Err(Error::NotConverged(format!(
        "inverse iteration did not settle in {} steps (residual {:e})",
        opts.max_outer,
        residual(action, &x)
    )))
}

/// Null-space solve for small generators, inverse iteration otherwise.
pub fn steady_state(action: &LiouvillianAction, rho0: &ComplexMatrix) -> Result<SteadyOutcome> {
    if action.dim() <= NULLSPACE_LIMIT {
        let m = action.materialize().expect("below the materialization limit");
        let state = steady_state_nullspace(&m)?;
        return Ok(SteadyOutcome {
            residual: residual(action, &state.vec_stack()?),
            state,
            method: SteadyMethod::Nullspace,
            model_time: None,
            iterations: 1,
        });
    }
    steady_state_inverse(action, rho0, InverseOptions::default())
}
