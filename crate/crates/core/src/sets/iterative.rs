//! Projections without a closed form: convex hulls, boxes in a non-diagonal
//! metric, and Minkowski sums.
//!
//! Hulls use Wolfe's minimum-norm-point method, which is exact up to
//! round-off. Boxes and general sums minimize `|x - p|^2 / 2` over a
//! parametrization whose proximal map is explicit (coordinate clamping, or
//! the component projections of a sum) with accelerated projected gradient.

use nalgebra::{DMatrix, DVector};

use super::{ConvexSet, ProjectionOptions};
use crate::error::{Error, Result};
use crate::fista::{self, FistaOptions};
use crate::space::{GramSpace, Vector};

/// Nearest point of `conv(vertices)` to `x` by Wolfe's minimum-norm-point
/// method on the translated points `v_j - x`. All inner products come from
/// one Gram table, so any metric works. Terminates after finitely many
/// corrals; `opts.max_iters` only guards against round-off cycling.
pub(crate) fn project_hull(
    vertices: &[Vector],
    x: &Vector,
    space: &GramSpace,
    opts: &ProjectionOptions,
) -> Result<Vector> {
    let m = vertices.len();
    if m == 1 {
        return Ok(vertices[0].clone());
    }
    let n = space.dim();
    let mut shifted = DMatrix::zeros(n, m);
    let mut lowered = DMatrix::zeros(n, m);
    for (j, v) in vertices.iter().enumerate() {
        let d = v - x;
        lowered.set_column(j, &space.lower(&d)?.0);
        shifted.set_column(j, &d);
    }
    let q = shifted.transpose() * &lowered;
    let q = (&q + q.transpose()) * 0.5;
    let scale = (0..m).map(|j| q[(j, j)]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let eps = 1e-13;

    let first = (0..m)
        .min_by(|&a, &b| q[(a, a)].total_cmp(&q[(b, b)]))
        .expect("at least two vertices");
    let mut corral = vec![first];
    let mut weights = vec![1.0];
    let mut iterations = 0usize;

    loop {
        // q_w[k] = (current point, p_k)
        let qw: Vec<f64> = (0..m)
            .map(|k| corral.iter().zip(&weights).map(|(&i, w)| w * q[(i, k)]).sum())
            .collect();
        let sq: f64 = corral.iter().zip(&weights).map(|(&i, w)| w * qw[i]).sum();
        let (j, best) = qw
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, v)| (j, *v))
            .expect("nonempty");
        if sq - best <= eps * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        weights.push(0.0);

        loop {
            iterations += 1;
            if iterations > opts.max_iters {
                return Err(Error::NonConvergence {
                    context: "hull projection",
                    iterations: opts.max_iters,
                    last_change: (sq - best).max(0.0).sqrt(),
                });
            }
            let alpha = affine_minimizer(&q, &corral);
            let Some(alpha) = alpha.filter(|a| a.iter().all(|v| v.is_finite())) else {
                // Numerically dependent corral: drop the newest point.
                corral.pop();
                weights.pop();
                break;
            };
            if alpha.iter().all(|&a| a > eps) {
                weights = alpha;
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, a)| **a <= eps)
                .map(|(w, a)| w / (w - a))
                .fold(1.0f64, f64::min);
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w += theta * (a - *w);
            }
            let mut k = 0;
            while k < corral.len() {
                if weights[k] <= eps {
                    corral.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
    }

    let mut point = DVector::zeros(n);
    for (&i, w) in corral.iter().zip(&weights) {
        point += &vertices[i] * *w;
    }
    Ok(point)
}

/// Weights `a` with `sum a = 1` minimizing `|sum a_i p_i|` over the corral.
fn affine_minimizer(q: &DMatrix<f64>, corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut sys = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate() {
            sys[(a, b)] = q[(i, j)];
        }
        sys[(a, k)] = 1.0;
        sys[(k, a)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    Some(sol.rows(0, k).iter().copied().collect())
}

pub(crate) fn project_box(
    lower: &Vector,
    upper: &Vector,
    x: &Vector,
    space: &GramSpace,
    opts: &ProjectionOptions,
) -> Result<Vector> {
    let clamp = |z: Vector| {
        DVector::from_fn(z.len(), |i, _| z[i].clamp(lower[i], upper[i]))
    };
    let start = clamp(x.clone());
    let out = fista::minimize(
        start,
        FistaOptions {
            step: 1.0 / space.lambda_max_bound(),
            max_iters: opts.max_iters,
            tol: opts.tol,
        },
        "box projection",
        |y| {
            let d = y - x;
            0.5 * space.inner_unchecked(d.as_slice(), d.as_slice())
        },
        |y| space.lower(&(y - x)).expect("dimension checked").0,
        |z, _| clamp(z),
        |d| space.inner_unchecked(d.as_slice(), d.as_slice()).max(0.0).sqrt(),
    )?;
    Ok(out.x)
}

/// Projection onto `left + right` over pairs `(a, b)`, using the component
/// projections as the proximal map. Gradients are taken in the space metric,
/// so the step is `1/2` independently of the Gram matrix.
pub(crate) fn project_sum(
    left: &ConvexSet,
    right: &ConvexSet,
    x: &Vector,
    space: &GramSpace,
    opts: &ProjectionOptions,
) -> Result<Vector> {
    let n = space.dim();
    let split = |w: &Vector| -> (Vector, Vector) {
        (w.rows(0, n).into_owned(), w.rows(n, n).into_owned())
    };
    let join = |a: &Vector, b: &Vector| -> Vector {
        let mut w = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(a);
        w.rows_mut(n, n).copy_from(b);
        w
    };

    let a0 = left.support_point(&DVector::zeros(n), space)?;
    let b0 = right.project_with(&(x - &a0), space, opts)?.point;
    let start = join(&a0, &b0);

    let mut failure = None;
    let out = fista::minimize(
        start,
        FistaOptions {
            step: 0.5,
            max_iters: opts.max_iters,
            tol: opts.tol,
        },
        "minkowski sum projection",
        |w| {
            let (a, b) = split(w);
            let r = x - a - b;
            0.5 * space.inner_unchecked(r.as_slice(), r.as_slice())
        },
        |w| {
            let (a, b) = split(w);
            let r = a + b - x;
            join(&r, &r)
        },
        |z, _| {
            let (a, b) = split(&z);
            let pa = left.project_with(&a, space, opts);
            let pb = right.project_with(&b, space, opts);
            match (pa, pb) {
                (Ok(pa), Ok(pb)) => join(&pa.point, &pb.point),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    z
                }
            }
        },
        |d| {
            let (a, b) = split(d);
            let s = space.inner_unchecked(a.as_slice(), a.as_slice())
                + space.inner_unchecked(b.as_slice(), b.as_slice());
            s.max(0.0).sqrt()
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (a, b) = split(&out?.x);
    Ok(a + b)
}
