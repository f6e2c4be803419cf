//! Damped quasi-Newton minimizer shared by the regression and panel fits.
//!
//! Each iteration minimizes the convex quadratic model built from the current
//! gradient and a positive-definite BFGS inverse-curvature estimate, then
//! backtracks by halving until the Armijo condition holds, so accepted
//! objective values are monotonically non-increasing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;
const POLISH_STEPS: usize = 5;

/// Rounding allowance of the descent check, relative to `max(|v|, 1)`.
/// Only the terminal Newton polish may use it.
pub const DESCENT_ROUNDING: f64 = 16.0 * f64::EPSILON;
const HESS_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_obj_tol: f64,
    /// Per-coordinate bound on the size of a single step.
    pub step_caps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct MinimizeOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub(crate) fn minimize<F>(
    mut objective: F,
    x0: DVector<f64>,
    h0_inv: DMatrix<f64>,
    opts: &MinimizeOptions,
) -> Result<MinimizeOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let (mut value, mut grad) = objective(&x0)?;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    let mut x = x0;
    let mut h_inv = h0_inv.clone();
    let mut trace = vec![value];
    let mut flat_iters = 0;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if grad.amax() <= opts.grad_tol {
            break;
        }
        iterations += 1;

        let mut dir = -(&h_inv * &grad);
        let mut slope = grad.dot(&dir);
        if !(slope < 0.0) {
            h_inv = h0_inv.clone();
            dir = -(&h_inv * &grad);
            slope = grad.dot(&dir);
            if !(slope < 0.0) {
                dir = -grad.clone();
                slope = grad.dot(&dir);
            }
        }
        let mut damp: f64 = 1.0;
        for j in 0..n {
            let cap = opts.step_caps.get(j).copied().unwrap_or(f64::INFINITY);
            if dir[j].abs() > cap {
                damp = damp.min(cap / dir[j].abs());
            }
        }
        dir *= damp;
        slope *= damp;

        let mut step = 1.0;
        let accepted = loop {
            let trial = &x + &dir * step;
            if let Ok((v, g)) = objective(&trial) {
                // at rounding level the Armijo decrease is not representable;
                // a non-increasing value with a smaller gradient still counts
                let noise = v <= value && g.amax() < grad.amax();
                if v.is_finite()
                    && g.iter().all(|gi| gi.is_finite())
                    && (v <= value + ARMIJO * step * slope || noise)
                {
                    break Some((trial, v, g));
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((x_new, v_new, g_new)) = accepted else {
            break;
        };

        let s = &x_new - &x;
        let yv = &g_new - &grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        let rel_change = (value - v_new).abs() / value.abs().max(1.0);
        let grad_shrank = g_new.amax() <= 0.5 * grad.amax();
        x = x_new;
        value = v_new;
        grad = g_new;
        trace.push(value);

        if rel_change <= opts.rel_obj_tol && !grad_shrank {
            flat_iters += 1;
            if flat_iters >= 3 {
                break;
            }
        } else {
            flat_iters = 0;
        }
    }

    // the objective is flat to rounding but the gradient is still above
    // tolerance: finish with Newton steps on a differenced Hessian
    let mut polish = 0;
    while grad.amax() > opts.grad_tol && polish < POLISH_STEPS && iterations < opts.max_iter {
        polish += 1;
        let Some(step) = newton_step(&mut objective, &x, &grad) else {
            break;
        };
        let trial = &x - step;
        let Ok((v, g)) = objective(&trial) else {
            break;
        };
        if !(v.is_finite() && v <= value + descent_slack(value) && g.amax() < grad.amax()) {
            break;
        }
        iterations += 1;
        x = trial;
        value = v;
        grad = g;
        trace.push(value);
    }

    let converged = grad.amax() <= opts.grad_tol;
    Ok(MinimizeOutcome {
        x,
        value,
        grad,
        iterations,
        converged,
        trace,
    })
}

pub(crate) fn descent_slack(v: f64) -> f64 {
    DESCENT_ROUNDING * v.abs().max(1.0)
}

fn newton_step<F>(objective: &mut F, x: &DVector<f64>, grad: &DVector<f64>) -> Option<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        let d = HESS_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + d;
        let gp = objective(&xp).ok()?.1;
        xp[j] = x[j] - d;
        let gm = objective(&xp).ok()?.1;
        xp[j] = x[j];
        h.set_column(j, &((gp - gm) / (2.0 * d)));
    }
    let h = (&h + h.transpose()) * 0.5;
    h.cholesky().map(|c| c.solve(grad))
}
