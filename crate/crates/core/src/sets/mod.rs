//! Nonempty, closed, bounded, convex sets described by their support
//! function, a maximizer of it, and the metric projection.
//!
//! All pairings use the inner product of the query [`GramSpace`]:
//! `support(v) = sup_{y in set} (v, y)`. Balls carry their own metric and
//! may only be queried in that metric.

mod directions;
mod iterative;

use nalgebra::DVector;

pub use directions::{sample_directions, DEFAULT_DIRECTION_SEED};

use crate::error::{check_dim, Error, Result};
use crate::space::{GramSpace, Vector};

/// Largest vertex list a box or Minkowski sum is expanded into before
/// falling back to an iterative projection.
const MAX_SUM_VERTICES: usize = 4096;

/// Tolerances for projections that are computed iteratively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Relative successive-iterate distance at which to stop.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vector,
    /// `||x - point||` in the query metric.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Point(Vector),
    Ball {
        center: Vector,
        radius: f64,
        metric: GramSpace,
    },
    Box {
        lower: Vector,
        upper: Vector,
    },
    Hull(Vec<Vector>),
    Sum(Box<ConvexSet>, Box<ConvexSet>),
}

impl ConvexSet {
    pub fn point(p: Vector) -> Self {
        ConvexSet::Point(p)
    }

    pub fn ball(center: Vector, radius: f64, metric: GramSpace) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        check_dim(metric.dim(), center.len())?;
        Ok(ConvexSet::Ball {
            center,
            radius,
            metric,
        })
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box requires lower <= upper".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn hull(vertices: Vec<Vector>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidArgument("hull needs at least one vertex".into()))?;
        let dim = first.len();
        for v in &vertices {
            check_dim(dim, v.len())?;
        }
        Ok(ConvexSet::Hull(vertices))
    }

    pub fn sum(left: ConvexSet, right: ConvexSet) -> Result<Self> {
        check_dim(left.dim(), right.dim())?;
        Ok(ConvexSet::Sum(Box::new(left), Box::new(right)))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Point(p) => p.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Hull(v) => v[0].len(),
            ConvexSet::Sum(a, _) => a.dim(),
        }
    }

    fn check_query(&self, v: &Vector, space: &GramSpace) -> Result<()> {
        check_dim(space.dim(), self.dim())?;
        check_dim(space.dim(), v.len())
    }

    /// `sup_{y in set} (v, y)` in the metric of `space`.
    pub fn support(&self, v: &Vector, space: &GramSpace) -> Result<f64> {
        self.check_query(v, space)?;
        self.support_unchecked(v, space)
    }

    fn support_unchecked(&self, v: &Vector, space: &GramSpace) -> Result<f64> {
        Ok(match self {
            ConvexSet::Point(p) => space.inner(v, p)?,
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                space.inner(v, center)? + radius * space.norm(v)?
            }
            ConvexSet::Box { lower, upper } => {
                // (v, y) = (G v)^T y is separable in y.
                let w = space.lower(v)?.0;
                w.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(wi, (l, u))| if *wi > 0.0 { wi * u } else { wi * l })
                    .sum()
            }
            ConvexSet::Hull(vertices) => {
                let w = space.lower(v)?.0;
                vertices
                    .iter()
                    .map(|a| w.dot(a))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            ConvexSet::Sum(a, b) => a.support_unchecked(v, space)? + b.support_unchecked(v, space)?,
        })
    }

    /// A maximizer of `(v, y)` over the set. Ties resolve to the ball
    /// center, the lowest hull vertex index and the lower box bound.
    pub fn support_point(&self, v: &Vector, space: &GramSpace) -> Result<Vector> {
        self.check_query(v, space)?;
        self.support_point_unchecked(v, space)
    }

    fn support_point_unchecked(&self, v: &Vector, space: &GramSpace) -> Result<Vector> {
        Ok(match self {
            ConvexSet::Point(p) => p.clone(),
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                let n = space.norm(v)?;
                if n == 0.0 {
                    center.clone()
                } else {
                    center + v * (radius / n)
                }
            }
            ConvexSet::Box { lower, upper } => {
                let w = space.lower(v)?.0;
                DVector::from_fn(w.len(), |i, _| if w[i] > 0.0 { upper[i] } else { lower[i] })
            }
            ConvexSet::Hull(vertices) => {
                let w = space.lower(v)?.0;
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (j, a) in vertices.iter().enumerate() {
                    let val = w.dot(a);
                    if val > best_val {
                        best = j;
                        best_val = val;
                    }
                }
                vertices[best].clone()
            }
            ConvexSet::Sum(a, b) => {
                a.support_point_unchecked(v, space)? + b.support_point_unchecked(v, space)?
            }
        })
    }

    /// Nearest point of the set to `x` in the metric of `space`.
    pub fn project(&self, x: &Vector, space: &GramSpace) -> Result<ProjectionResult> {
        self.project_with(x, space, &ProjectionOptions::default())
    }

    pub fn project_with(
        &self,
        x: &Vector,
        space: &GramSpace,
        opts: &ProjectionOptions,
    ) -> Result<ProjectionResult> {
        self.check_query(x, space)?;
        let point = self.project_point(x, space, opts)?;
        let distance = space.distance(x, &point)?;
        Ok(ProjectionResult { point, distance })
    }

    fn project_point(&self, x: &Vector, space: &GramSpace, opts: &ProjectionOptions) -> Result<Vector> {
        match self {
            ConvexSet::Point(p) => Ok(p.clone()),
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                let d = x - center;
                let n = space.norm(&d)?;
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + d * (radius / n))
                }
            }
            ConvexSet::Box { lower, upper } => {
                if space.is_diagonal() {
                    Ok(DVector::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i])))
                } else if let Some(corners) = self.vertices(MAX_SUM_VERTICES) {
                    iterative::project_hull(&corners, x, space, opts)
                } else {
                    iterative::project_box(lower, upper, x, space, opts)
                }
            }
            ConvexSet::Hull(vertices) => iterative::project_hull(vertices, x, space, opts),
            ConvexSet::Sum(a, b) => match (a.as_ref(), b.as_ref()) {
                (ConvexSet::Point(p), other) | (other, ConvexSet::Point(p)) => {
                    Ok(p + other.project_point(&(x - p), space, opts)?)
                }
                (
                    ConvexSet::Ball {
                        center,
                        radius,
                        metric,
                    },
                    other,
                )
                | (
                    other,
                    ConvexSet::Ball {
                        center,
                        radius,
                        metric,
                    },
                ) if metric == space => {
                    // other + B(c, r) = { y : dist(y - c, other) <= r }
                    let shifted = x - center;
                    let a = other.project_point(&shifted, space, opts)?;
                    let d = &shifted - &a;
                    let n = space.norm(&d)?;
                    if n <= *radius {
                        Ok(x.clone())
                    } else {
                        Ok(a + center + d * (radius / n))
                    }
                }
                _ => match self.vertices(MAX_SUM_VERTICES) {
                    Some(v) => iterative::project_hull(&v, x, space, opts),
                    None => iterative::project_sum(a, b, x, space, opts),
                },
            },
        }
    }

    /// A finite vertex list whose hull is the set, when one exists with at
    /// most `limit` entries.
    fn vertices(&self, limit: usize) -> Option<Vec<Vector>> {
        match self {
            ConvexSet::Point(p) => Some(vec![p.clone()]),
            ConvexSet::Ball { radius, center, .. } if *radius == 0.0 => Some(vec![center.clone()]),
            ConvexSet::Ball { .. } => None,
            ConvexSet::Hull(v) => (v.len() <= limit).then(|| v.clone()),
            ConvexSet::Box { lower, upper } => {
                let free: Vec<usize> = (0..lower.len()).filter(|&i| lower[i] < upper[i]).collect();
                if free.len() >= usize::BITS as usize - 1 || 1usize << free.len() > limit {
                    return None;
                }
                Some(
                    (0..1usize << free.len())
                        .map(|mask| {
                            let mut c = lower.clone();
                            for (bit, &i) in free.iter().enumerate() {
                                if mask >> bit & 1 == 1 {
                                    c[i] = upper[i];
                                }
                            }
                            c
                        })
                        .collect(),
                )
            }
            ConvexSet::Sum(a, b) => {
                let va = a.vertices(limit)?;
                let vb = b.vertices(limit)?;
                if va.len() * vb.len() > limit {
                    return None;
                }
                Some(va.iter().flat_map(|p| vb.iter().map(move |q| p + q)).collect())
            }
        }
    }

    /// Proximal map of `t * support(., set)`:
    /// `argmin_y t * support(y) + ||y - z||^2 / 2`.
    ///
    /// Closed form for points and balls, Moreau decomposition
    /// `z - t * project(z / t)` otherwise.
    pub fn prox_support(&self, z: &Vector, t: f64, space: &GramSpace) -> Result<Vector> {
        self.check_query(z, space)?;
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("prox step must be > 0, got {t}")));
        }
        match self {
            ConvexSet::Point(p) => Ok(z - p * t),
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                let w = z - center * t;
                let n = space.norm(&w)?;
                if n <= t * radius {
                    Ok(DVector::zeros(z.len()))
                } else {
                    Ok(&w * (1.0 - t * radius / n))
                }
            }
            _ => {
                let p = self.project(&(z / t), space)?.point;
                Ok(z - p * t)
            }
        }
    }

    /// `sup_{y in set} ||y||`. Exact except for sums, where it is found by
    /// support-point ascent from sampled directions (a lower estimate).
    pub fn norm_bound(&self, space: &GramSpace) -> Result<f64> {
        check_dim(space.dim(), self.dim())?;
        match self {
            ConvexSet::Point(p) => space.norm(p),
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                Ok(space.norm(center)? + radius)
            }
            ConvexSet::Hull(vertices) => vertices
                .iter()
                .map(|v| space.norm(v))
                .try_fold(0.0f64, |acc, n| n.map(|n| acc.max(n))),
            _ => self.ascend(space, |set, v| set.support_point(v, space)),
        }
    }

    /// `sup_{a, b in set} ||a - b||`. Exact for points, balls and hulls;
    /// support-point ascent otherwise.
    pub fn diameter(&self, space: &GramSpace) -> Result<f64> {
        check_dim(space.dim(), self.dim())?;
        match self {
            ConvexSet::Point(_) => Ok(0.0),
            ConvexSet::Ball { radius, metric, .. } => {
                if metric != space {
                    return Err(Error::MetricMismatch);
                }
                Ok(2.0 * radius)
            }
            ConvexSet::Hull(vertices) => {
                let mut best = 0.0f64;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        best = best.max(space.distance(a, b)?);
                    }
                }
                Ok(best)
            }
            _ => self.ascend(space, |set, v| {
                Ok(set.support_point(v, space)? - set.support_point(&-v, space)?)
            }),
        }
    }

    /// Maximizes `||step(v)||` by the fixed-point ascent `v <- step(v)` from
    /// each sampled direction. Each step does not decrease the value since
    /// `||step(v)|| >= (v, step(v)) / ||v||` for the maps used here.
    fn ascend(
        &self,
        space: &GramSpace,
        step: impl Fn(&ConvexSet, &Vector) -> Result<Vector>,
    ) -> Result<f64> {
        let dirs = sample_directions(space, 8 * space.dim().max(2), DEFAULT_DIRECTION_SEED)?;
        let mut best = 0.0f64;
        for mut v in dirs {
            let mut value = 0.0f64;
            for _ in 0..200 {
                let s = step(self, &v)?;
                let n = space.norm(&s)?;
                if n <= value * (1.0 + 1e-14) || n == 0.0 {
                    value = value.max(n);
                    break;
                }
                value = n;
                v = s / n;
            }
            best = best.max(value);
        }
        Ok(best)
    }
}

/// Lower estimate of the excess `e(a, b) = sup_{x in a} dist(x, b)` from
/// support differences over `ndirs` unit directions of `space`.
///
/// For convex `b`, `e(a, b) = max(0, sup_{||v|| = 1} support(v, a) - support(v, b))`;
/// the estimate never exceeds it and is nondecreasing in `ndirs`.
pub fn excess_estimate(a: &ConvexSet, b: &ConvexSet, space: &GramSpace, ndirs: usize) -> Result<f64> {
    excess_estimate_seeded(a, b, space, ndirs, DEFAULT_DIRECTION_SEED)
}

pub fn excess_estimate_seeded(
    a: &ConvexSet,
    b: &ConvexSet,
    space: &GramSpace,
    ndirs: usize,
    seed: u64,
) -> Result<f64> {
    if ndirs == 0 {
        return Err(Error::InvalidArgument("ndirs must be >= 1".into()));
    }
    check_dim(space.dim(), a.dim())?;
    check_dim(space.dim(), b.dim())?;
    let mut best = 0.0f64;
    for v in sample_directions(space, ndirs, seed)? {
        best = best.max(a.support(&v, space)? - b.support(&v, space)?);
    }
    Ok(best)
}
