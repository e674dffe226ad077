//! Accelerated proximal gradient with function-value restart.

use crate::error::{Error, Result};
use crate::space::Vector;

#[derive(Debug, Clone, Copy)]
pub(crate) struct FistaOptions {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once `||x_{k+1} - x_k|| < tol * (1 + ||x_{k+1}||)`.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct FistaOutcome {
    pub x: Vector,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimizes `f + g` where `f` is smooth (`gradient`) and `g` has a cheap
/// proximal map `prox(z, t) = argmin_y t g(y) + |y - z|^2 / 2`.
///
/// Momentum is reset whenever the objective increases; the plain step taken
/// right after a reset is always accepted, so round-off cannot stall the loop.
pub(crate) fn minimize(
    x0: Vector,
    opts: FistaOptions,
    context: &'static str,
    mut objective: impl FnMut(&Vector) -> f64,
    mut gradient: impl FnMut(&Vector) -> Vector,
    mut prox: impl FnMut(Vector, f64) -> Vector,
    mut norm: impl FnMut(&Vector) -> f64,
) -> Result<FistaOutcome> {
    let step = opts.step;
    let mut x = x0;
    let mut y = x.clone();
    let mut fx = objective(&x);
    let mut t = 1.0f64;
    let mut last_change = f64::INFINITY;

    for iter in 1..=opts.max_iters {
        let g = gradient(&y);
        let z = prox(&y - g * step, step);
        let fz = objective(&z);
        if fz > fx && t > 1.0 {
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let diff = &z - &x;
        last_change = norm(&diff);
        y = &z + diff * ((t - 1.0) / t_next);
        x = z;
        fx = fz;
        t = t_next;
        if last_change < opts.tol * (1.0 + norm(&x)) {
            return Ok(FistaOutcome {
                x,
                objective: fx,
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        context,
        iterations: opts.max_iters,
        last_change,
    })
}
