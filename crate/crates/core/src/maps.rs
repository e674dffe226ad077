//! Set-valued maps given as oracles, and sampled estimates of their
//! one-sided (ROSL) and Lipschitz constants.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::sets::{excess_estimate, ConvexSet};
use crate::solver::{solve, SolveOptions};
use crate::space::{GramSpace, Vector};

type EvalFn = dyn Fn(&Vector) -> Result<ConvexSet> + Send + Sync;

/// `x -> F(x)` with optional declared constants: `l` (relaxed one-sided
/// Lipschitz) and `L` (Lipschitz with respect to the excess).
#[derive(Clone)]
pub struct SetValuedMap {
    domain: GramSpace,
    codomain: GramSpace,
    eval: Arc<EvalFn>,
    declared_l: Option<f64>,
    declared_lipschitz: Option<f64>,
}

impl fmt::Debug for SetValuedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetValuedMap")
            .field("dim", &self.domain.dim())
            .field("declared_l", &self.declared_l)
            .field("declared_lipschitz", &self.declared_lipschitz)
            .finish_non_exhaustive()
    }
}

impl SetValuedMap {
    pub fn new<F>(domain: GramSpace, codomain: GramSpace, eval: F) -> Self
    where
        F: Fn(&Vector) -> Result<ConvexSet> + Send + Sync + 'static,
    {
        Self {
            domain,
            codomain,
            eval: Arc::new(eval),
            declared_l: None,
            declared_lipschitz: None,
        }
    }

    /// `F(x) = A x + b + Ball(0, r)` on a single space, with the exact
    /// constants declared: `l = lambda_max(sym A)` (for `G = I`) and
    /// `L = ||A||`.
    ///
    /// The constants are computed in the space metric, i.e. from the
    /// `G`-symmetrized operator `G^{1/2} A G^{-1/2}`.
    pub fn affine_ball(a: DMatrix<f64>, b: Vector, radius: f64, space: GramSpace) -> Result<Self> {
        let n = space.dim();
        check_dim(n, a.nrows())?;
        check_dim(n, a.ncols())?;
        check_dim(n, b.len())?;
        let (l, lip) = affine_constants(&a, &space)?;
        let ball = ConvexSet::ball(DVector::zeros(n), radius, space.clone())?;
        let map = Self::new(space.clone(), space, move |x| {
            let center = &a * x + &b;
            if radius == 0.0 {
                Ok(ConvexSet::point(center))
            } else {
                ConvexSet::sum(ConvexSet::point(center), ball.clone())
            }
        });
        Ok(map.with_rosl(l).with_lipschitz(lip))
    }

    pub fn with_rosl(mut self, l: f64) -> Self {
        self.declared_l = Some(l);
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.declared_lipschitz = Some(lipschitz);
        self
    }

    pub fn domain(&self) -> &GramSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &GramSpace {
        &self.codomain
    }

    pub fn declared_l(&self) -> Option<f64> {
        self.declared_l
    }

    pub fn declared_lipschitz(&self) -> Option<f64> {
        self.declared_lipschitz
    }

    pub fn eval(&self, x: &Vector) -> Result<ConvexSet> {
        check_dim(self.domain.dim(), x.len())?;
        let set = (self.eval)(x)?;
        check_dim(self.codomain.dim(), set.dim())?;
        Ok(set)
    }
}

/// Largest eigenvalue of the symmetric part and spectral norm of `A`
/// as an operator on `(R^n, G)`.
fn affine_constants(a: &DMatrix<f64>, space: &GramSpace) -> Result<(f64, f64)> {
    let g = space.to_dense();
    let eig = g.clone().symmetric_eigen();
    let sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let t = &sqrt * a * &inv_sqrt;
    let sym = (&t + t.transpose()) * 0.5;
    let l = sym.symmetric_eigen().eigenvalues.max();
    let lip = t.singular_values().max();
    if !l.is_finite() || !lip.is_finite() {
        return Err(Error::InvalidArgument("non-finite affine map".into()));
    }
    Ok((l, lip))
}

/// Pairs `(x, x')` at which map constants are sampled.
///
/// Plans built from a seed are prefix-nested: the first `k` pairs do not
/// depend on `count`, so estimates are monotone in the count.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub pairs: Vec<(Vector, Vector)>,
    pub seed: u64,
}

impl SamplePlan {
    pub const DEFAULT_COUNT: usize = 500;

    pub fn from_pairs(pairs: Vec<(Vector, Vector)>) -> Self {
        Self { pairs, seed: 0 }
    }

    /// Uniform pairs in the box `[lower, upper]`.
    pub fn uniform_box(lower: &Vector, upper: &Vector, count: usize, seed: u64) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("sample box requires lower <= upper".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = lower.len();
        let draw = |rng: &mut ChaCha8Rng| {
            DVector::from_fn(n, |i, _| lower[i] + (upper[i] - lower[i]) * rng.random::<f64>())
        };
        let pairs = (0..count)
            .map(|_| {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                (x, y)
            })
            .collect();
        Ok(Self { pairs, seed })
    }

    /// `count` pairs in `[-1, 1]^dim`.
    pub fn unit_box(dim: usize, count: usize, seed: u64) -> Self {
        let one = DVector::from_element(dim, 1.0);
        Self::uniform_box(&-&one, &one, count, seed).expect("valid unit box")
    }

    /// Uniform pairs in the Euclidean ball of radius `radius`.
    pub fn uniform_ball(dim: usize, radius: f64, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| loop {
            let p = DVector::from_fn(dim, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            if p.norm_squared() <= 1.0 {
                return p * radius;
            }
        };
        let pairs = (0..count)
            .map(|_| {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                (x, y)
            })
            .collect();
        Self { pairs, seed }
    }

    pub fn count(&self) -> usize {
        self.pairs.len()
    }
}

/// Largest sampled value of
/// `[support(d, F(x)) - support(d, F(x'))] / ||d||^2`, `d = x - x'`,
/// over both orderings of each pair. A lower bound for the smallest valid
/// ROSL constant. Pairs with `x = x'` are skipped; `-inf` if none remain.
pub fn rosl_estimate(map: &SetValuedMap, plan: &SamplePlan) -> Result<f64> {
    let values: Vec<f64> = plan
        .pairs
        .par_iter()
        .map(|(x, xp)| {
            let d = x - xp;
            let dn = map.domain.norm(&d)?;
            if dn == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let fx = map.eval(x)?;
            let fxp = map.eval(xp)?;
            let cod = &map.codomain;
            let forward = fx.support(&d, cod)? - fxp.support(&d, cod)?;
            let md = -&d;
            let backward = fxp.support(&md, cod)? - fx.support(&md, cod)?;
            Ok(forward.max(backward) / (dn * dn))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Largest sampled value of `max(e(F(x), F(x')), e(F(x'), F(x))) / ||x - x'||`
/// with excesses estimated from `ndirs` directions.
pub fn lipschitz_estimate(map: &SetValuedMap, plan: &SamplePlan, ndirs: usize) -> Result<f64> {
    let values: Vec<f64> = plan
        .pairs
        .par_iter()
        .map(|(x, xp)| {
            let dn = map.domain.distance(x, xp)?;
            if dn == 0.0 {
                return Ok(0.0);
            }
            let fx = map.eval(x)?;
            let fxp = map.eval(xp)?;
            let e1 = excess_estimate(&fx, &fxp, &map.codomain, ndirs)?;
            let e2 = excess_estimate(&fxp, &fx, &map.codomain, ndirs)?;
            Ok(e1.max(e2) / dn)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Numerical evidence for the properties of `F^{-1}` when `F` is `l`-ROSL
/// with `l < 0`: `-1/l`-Lipschitz, 0-ROSL, and the norm and diameter bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseReport {
    /// Solution of `y in F(x)` from the zero start.
    pub x: Vector,
    /// Solution of `y2 in F(x')` started at `x`.
    pub x_prime: Vector,
    /// `||x' - x|| / ||y2 - y||`, to be compared with `lipschitz_bound`.
    pub ratio: f64,
    /// `-1/l`.
    pub lipschitz_bound: f64,
    /// `||x||`.
    pub norm: f64,
    /// `-(1/l) (sup ||F(0)|| + ||y||)`.
    pub norm_bound: f64,
    /// `(y2 - y, x' - x)`, nonpositive up to round-off.
    pub rosl_pairing: f64,
    /// `||y2 - y||^2`, the scale for `rosl_pairing`.
    pub rosl_scale: f64,
    /// `-(1/l) diam F(x)`, an upper bound for `diam F^{-1}(y)`.
    pub diameter_bound: f64,
}

impl InverseReport {
    /// True when all inequalities hold up to `tol` (relative for the
    /// pairing, absolute otherwise).
    pub fn holds(&self, tol: f64) -> bool {
        self.ratio <= self.lipschitz_bound + tol
            && self.norm <= self.norm_bound + tol
            && self.rosl_pairing <= tol * self.rosl_scale.max(1.0)
    }
}

pub fn verify_inverse_properties(
    map: &SetValuedMap,
    y: &Vector,
    y2: &Vector,
    opts: &SolveOptions,
) -> Result<InverseReport> {
    let l = match map.declared_l {
        Some(l) if l < 0.0 => l,
        other => {
            return Err(Error::Precondition(format!(
                "inverse properties need a declared l < 0, got {other:?}"
            )))
        }
    };
    let dom = &map.domain;
    let cod = &map.codomain;
    let zero = DVector::zeros(dom.dim());
    let first = solve(map, y, &zero, opts)?;
    let x = first.solution;
    let second = solve(map, y2, &x, opts)?;
    let x_prime = second.solution;

    let dy = y2 - y;
    let dx = &x_prime - &x;
    let dy_norm = cod.norm(&dy)?;
    let ratio = if dy_norm == 0.0 {
        0.0
    } else {
        dom.norm(&dx)? / dy_norm
    };
    let f0 = map.eval(&zero)?.norm_bound(cod)?;
    let norm = dom.norm(&x)?;
    Ok(InverseReport {
        ratio,
        lipschitz_bound: -1.0 / l,
        norm,
        norm_bound: -(f0 + cod.norm(y)?) / l,
        rosl_pairing: cod.inner(&dy, &dx)?,
        rosl_scale: dy_norm * dy_norm,
        diameter_bound: -map.eval(&x)?.diameter(cod)? / l,
        x,
        x_prime,
    })
}
