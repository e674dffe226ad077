//! Independent reference computations used by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type V = DVector<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> V {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    raw.qr().q()
}

/// Symmetric negative definite `A = -Q diag(lambda) Q'` with
/// `lambda` in `[lo, hi]`.
pub fn negative_definite(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let lambda = DVector::from_fn(n, |_, _| rng.random_range(lo..=hi));
    let a = -(&q * DMatrix::from_diagonal(&lambda) * q.transpose());
    (&a + a.transpose()) * 0.5
}

/// SPD Gram matrix with eigenvalues in `[0.5, 3]`.
pub fn random_gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let lambda = DVector::from_fn(n, |_, _| rng.random_range(0.5..=3.0));
    let g = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    (&g + g.transpose()) * 0.5
}

/// Euclidean distance from `x` to `{z : |A z - y| <= r}` for symmetric
/// invertible `A`, by bisection on the multiplier of
/// `z(mu) = (I + mu A^2)^{-1} (x + mu A y)`.
pub fn ellipsoid_distance(a: &DMatrix<f64>, y: &V, r: f64, x: &V) -> f64 {
    let excess = |z: &V| (a * z - y).norm() - r;
    if excess(x) <= 0.0 {
        return 0.0;
    }
    let n = x.len();
    let a2 = a * a;
    let z_of = |mu: f64| -> V {
        let m = DMatrix::identity(n, n) + &a2 * mu;
        m.lu().solve(&(x + a * y * mu)).expect("SPD system")
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while excess(&z_of(hi)) > 0.0 {
        hi *= 2.0;
        assert!(hi < 1e30, "ellipsoid bisection diverged");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(&z_of(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (x - z_of(hi)).norm()
}

/// `F^{-1}(y)` for `F(x) = a x + [c - r, c + r]` on the line, `a != 0`.
pub fn interval_inverse(a: f64, c: f64, r: f64, y: f64) -> (f64, f64) {
    let p = (y - c - r) / a;
    let q = (y - c + r) / a;
    (p.min(q), p.max(q))
}

pub fn interval_distance(lo: f64, hi: f64, x: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Nearest point of `conv(vertices)` to `x` in the metric `g`, by
/// enumerating every vertex subset of size at most `dim + 1`, projecting
/// onto its affine hull, and keeping the best feasible candidate.
pub fn hull_projection(vertices: &[V], x: &V, g: &DMatrix<f64>) -> (V, f64) {
    let m = vertices.len();
    let d = x.len();
    let norm = |v: &V| v.dot(&(g * v)).max(0.0).sqrt();
    let mut best: Option<(V, f64)> = None;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if idx.len() > d + 1 {
            continue;
        }
        let k = idx.len();
        let p: Vec<V> = idx.iter().map(|&i| &vertices[i] - x).collect();
        let mut sys = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for a in 0..k {
            for b in 0..k {
                sys[(a, b)] = p[a].dot(&(g * &p[b]));
            }
            sys[(a, k)] = 1.0;
            sys[(k, a)] = 1.0;
        }
        rhs[k] = 1.0;
        let Some(sol) = sys.clone().lu().solve(&rhs) else { continue };
        if (&sys * &sol - &rhs).norm() > 1e-9 {
            continue;
        }
        if (0..k).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let mut point = DVector::zeros(d);
        for a in 0..k {
            point += &vertices[idx[a]] * sol[a];
        }
        let dist = norm(&(x - &point));
        if best.as_ref().is_none_or(|(_, b)| dist < *b) {
            best = Some((point, dist));
        }
    }
    best.expect("singletons are always feasible")
}

/// Nearest point of `B(c, r)` (metric `g`) to `x`.
pub fn ball_projection(c: &V, r: f64, x: &V, g: &DMatrix<f64>) -> (V, f64) {
    let d = x - c;
    let n = d.dot(&(g * &d)).sqrt();
    if n <= r {
        (x.clone(), 0.0)
    } else {
        (c + d * (r / n), n - r)
    }
}
