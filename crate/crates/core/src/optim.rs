//! Unconstrained quasi-Newton minimization (BFGS on the inverse Hessian with
//! a backtracking Armijo line search).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop once the gradient 2-norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was met.
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

/// Minimizes `f`, which returns the value and gradient at a point. Non-finite
/// values are treated as infeasible and rejected by the line search.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gnorm = g.norm();
        if gnorm < opts.grad_tol || !fx.is_finite() {
            break;
        }
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            d = -g.clone();
            slope = -gnorm * gnorm;
        }
        let mut step = if fresh { (1.0 / gnorm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let xn = &x + &d * step;
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + ARMIJO_C1 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;

        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                // steepest descent cannot make progress at this precision
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if fresh {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s (Hy)^T + (Hy) s^T) + (rho^2 yHy + rho) s s^T
            h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        let stalled = (fx - fn_).abs() <= f64::EPSILON * fx.abs().max(1.0) && s.norm() == 0.0;
        x = xn;
        fx = fn_;
        g = gn;
        if stalled {
            break;
        }
    }

    let grad_norm = g.norm();
    Minimum {
        x,
        value: fx,
        grad_norm,
        iterations,
        converged: grad_norm < opts.grad_tol,
    }
}
