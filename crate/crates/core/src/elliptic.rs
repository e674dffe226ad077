//! Systems of two elliptic differential inclusions on `(0, 1)` with
//! homogeneous Dirichlet data,
//!
//! ```text
//! 0 in u'' + f(x, u),   u = (u1, u2),
//! ```
//!
//! discretized with P1 elements and a lumped mass matrix. Each outer step
//! computes `h* = J_W Proj_{W*}(0, Laplace u + N_f(u))` as the minimizer of
//! the dual functional
//!
//! ```text
//! I(h) = 1/2 h'Gh + h'Ku + sum_i w_i sigma(-h_i, f(x_i, u_i)),   G = K - l_f M,
//! ```
//!
//! and updates `u <- u + h*/2`. The residual is `||h*||_W`.
//!
//! Vectors hold the interior nodal values of `u1` followed by those of `u2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fista::{self, FistaOptions};
use crate::gelfand::{composite_constants, GelfandData};
use crate::maps::SetValuedMap;
use crate::sets::ConvexSet;
use crate::solver::apriori_bounds;
use crate::space::{GramSpace, Vector};

/// Nodes handed to one rayon task; below this the work is too small to split.
const MIN_NODES_PER_TASK: usize = 256;

type PointwiseFn = dyn Fn(f64, [f64; 2]) -> Result<ConvexSet> + Send + Sync;

/// Linear growth `sup |f(x, s)| <= alpha + beta |s|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub alpha: f64,
    pub beta: f64,
}

/// `(x, s) -> f(x, s)`, a convex compact subset of `R^2` (Euclidean metric),
/// uniformly `l_f`-ROSL in `s` and optionally `L_f`-Lipschitz.
#[derive(Clone)]
pub struct PointwiseMap {
    name: String,
    eval: Arc<PointwiseFn>,
    l_f: f64,
    lipschitz: Option<f64>,
    growth: Option<Growth>,
}

impl std::fmt::Debug for PointwiseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointwiseMap")
            .field("name", &self.name)
            .field("l_f", &self.l_f)
            .field("lipschitz", &self.lipschitz)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl PointwiseMap {
    pub fn new<F>(name: impl Into<String>, l_f: f64, eval: F) -> Self
    where
        F: Fn(f64, [f64; 2]) -> Result<ConvexSet> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            l_f,
            lipschitz: None,
            growth: None,
        }
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn with_growth(mut self, growth: Growth) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn eval(&self, x: f64, s: [f64; 2]) -> Result<ConvexSet> {
        let set = (self.eval)(x, s)?;
        if set.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: set.dim(),
            });
        }
        Ok(set)
    }

    /// `s -> f(x, s)` as a map on Euclidean `R^2`, carrying `l_f` and `L_f`.
    pub fn at(&self, x: f64) -> SetValuedMap {
        let me = self.clone();
        let e2 = GramSpace::euclidean(2);
        let map = SetValuedMap::new(e2.clone(), e2, move |s| me.eval(x, [s[0], s[1]]))
            .with_rosl(self.l_f);
        match self.lipschitz {
            Some(lip) => map.with_lipschitz(lip),
            None => map,
        }
    }
}

/// Parameters of the built-in right-hand sides; `None` picks the default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RhsParams {
    pub l_f: Option<f64>,
    pub radius: Option<f64>,
}

/// The two reference right-hand sides, each a point plus a disc:
///
/// * `bsp1`: `-(4/9) |s|^2 / (1 + |s|^2) s + l_f s + B_R(0)`,
///   defaults `l_f = -1`, `R = 10`; `L_f = 1/2 - l_f`.
/// * `bsp2`: `(-s1 s2 + 1 - s1 + x, -s1 s2 + 1 - s2 + x) + B_R(0)`,
///   default `R = 5`. Not globally Lipschitz; `l_f = -1` is taken from the
///   linear part and only shapes the `W`-norm.
pub fn builtin_rhs(name: &str, params: RhsParams) -> Result<PointwiseMap> {
    let disc = |r: f64| -> Result<ConvexSet> { ConvexSet::ball(DVector::zeros(2), r, GramSpace::euclidean(2)) };
    match name {
        "bsp1" => {
            let l_f = params.l_f.unwrap_or(-1.0);
            let radius = params.radius.unwrap_or(10.0);
            let ball = disc(radius)?;
            let map = PointwiseMap::new("bsp1", l_f, move |_x, s| {
                let s2 = s[0] * s[0] + s[1] * s[1];
                let c = -(4.0 / 9.0) * s2 / (1.0 + s2) + l_f;
                ConvexSet::sum(ConvexSet::point(DVector::from_column_slice(&[c * s[0], c * s[1]])), ball.clone())
            });
            Ok(map.with_lipschitz(0.5 - l_f).with_growth(Growth {
                alpha: radius,
                beta: 4.0 / 9.0 + l_f.abs(),
            }))
        }
        "bsp2" => {
            let l_f = params.l_f.unwrap_or(-1.0);
            let radius = params.radius.unwrap_or(5.0);
            let ball = disc(radius)?;
            Ok(PointwiseMap::new("bsp2", l_f, move |x, s| {
                let p = -s[0] * s[1] + 1.0 + x;
                ConvexSet::sum(ConvexSet::point(DVector::from_column_slice(&[p - s[0], p - s[1]])), ball.clone())
            }))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown right-hand side {other:?} (expected bsp1 or bsp2)"
        ))),
    }
}

/// Initial data matching the built-in right-hand sides:
///
/// * `bsp1`: `(sin(2 pi x) / 2, sin(16 pi x) / 2)`
/// * `bsp2`: `x(1-x) exp(-(x-0.1)^2/0.1)`, `x(1-x) exp(-(x-0.8)^2/0.01)`
pub fn builtin_initial(name: &str, grid: &GelfandGrid) -> Result<Vector> {
    let (a, b): (fn(f64) -> f64, fn(f64) -> f64) = match name {
        "bsp1" => (|x| 0.5 * (2.0 * PI * x).sin(), |x| 0.5 * (16.0 * PI * x).sin()),
        "bsp2" => (
            |x| x * (1.0 - x) * (-(x - 0.1).powi(2) / 0.1).exp(),
            |x| x * (1.0 - x) * (-(x - 0.8).powi(2) / 0.01).exp(),
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown initial data {other:?} (expected bsp1 or bsp2)"
            )))
        }
    };
    Ok(grid.from_components(|x| a(x), |x| b(x)))
}

/// Uniform P1 grid on `(0, 1)` with `N` cells, carrying the stiffness
/// (`V`), lumped mass (`H`) and mixed (`W`, `lV = -1`, `lH = l_f`) metrics.
#[derive(Debug, Clone)]
pub struct GelfandGrid {
    cells: usize,
    nodes: Vec<f64>,
    weight: f64,
    gelfand: GelfandData,
    rhs: PointwiseMap,
}

/// One interior node's set, in a form with cheap support and prox.
#[derive(Debug, Clone)]
enum NodeSet {
    Disc { c: [f64; 2], r: f64 },
    General(ConvexSet),
}

fn compile(set: &ConvexSet) -> NodeSet {
    fn disc(set: &ConvexSet) -> Option<([f64; 2], f64)> {
        match set {
            ConvexSet::Point(p) => Some(([p[0], p[1]], 0.0)),
            ConvexSet::Ball {
                center,
                radius,
                metric,
            } if *metric == GramSpace::euclidean(2) => Some(([center[0], center[1]], *radius)),
            ConvexSet::Sum(a, b) => {
                let (ca, ra) = disc(a)?;
                let (cb, rb) = disc(b)?;
                Some(([ca[0] + cb[0], ca[1] + cb[1]], ra + rb))
            }
            _ => None,
        }
    }
    match disc(set) {
        Some((c, r)) => NodeSet::Disc { c, r },
        None => NodeSet::General(set.clone()),
    }
}

fn vec2(v: [f64; 2]) -> Vector {
    DVector::from_column_slice(&v)
}

impl NodeSet {
    fn support(&self, v: [f64; 2]) -> Result<f64> {
        match self {
            NodeSet::Disc { c, r } => Ok(v[0] * c[0] + v[1] * c[1] + r * v[0].hypot(v[1])),
            NodeSet::General(set) => set.support(&vec2(v), &GramSpace::euclidean(2)),
        }
    }

    fn support_point(&self, v: [f64; 2]) -> Result<[f64; 2]> {
        match self {
            NodeSet::Disc { c, r } => {
                let n = v[0].hypot(v[1]);
                if n == 0.0 {
                    Ok(*c)
                } else {
                    Ok([c[0] + r * v[0] / n, c[1] + r * v[1] / n])
                }
            }
            NodeSet::General(set) => {
                let p = set.support_point(&vec2(v), &GramSpace::euclidean(2))?;
                Ok([p[0], p[1]])
            }
        }
    }

    /// `argmin_h s sigma(-h, C) + |h - y|^2 / 2 = y + s P_C(-y / s)`.
    fn prox_neg(&self, y: [f64; 2], s: f64) -> Result<[f64; 2]> {
        match self {
            NodeSet::Disc { c, r } => {
                let z = [y[0] + s * c[0], y[1] + s * c[1]];
                let nz = z[0].hypot(z[1]);
                let thr = s * r;
                if nz <= thr {
                    Ok([0.0, 0.0])
                } else {
                    let k = 1.0 - thr / nz;
                    Ok([z[0] * k, z[1] * k])
                }
            }
            NodeSet::General(set) => {
                let p = set.project(&vec2([-y[0] / s, -y[1] / s]), &GramSpace::euclidean(2))?.point;
                Ok([y[0] + s * p[0], y[1] + s * p[1]])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdiOptions {
    /// Relative successive-iterate `W`-distance at which the inner solve stops.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Number of updates `u <- u + h*/2`; `max_steps + 1` residuals at most.
    pub max_steps: usize,
    /// Stop once the residual drops to this value.
    pub tol_residual: f64,
    pub record_iterates: bool,
    /// Run even when the composite contraction factor is unknown or >= 1.
    pub allow_unjustified: bool,
}

impl Default for PdiOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-9,
            inner_max_iters: 200_000,
            max_steps: 200,
            tol_residual: 1e-6,
            record_iterates: false,
            allow_unjustified: false,
        }
    }
}

/// Result of one projection step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStep {
    pub h: Vector,
    /// `||h||_W`.
    pub residual: f64,
    pub inner_iterations: usize,
    /// `I(h)`; equals `-residual^2 / 2` at the exact minimizer.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdiReport {
    pub solution: Vector,
    /// `u_0, u_1, ...` when requested.
    pub iterates: Option<Vec<Vector>>,
    pub residuals: Vec<f64>,
    pub inner_iterations: Vec<usize>,
    /// `|I(h*) + residual^2 / 2|` per step.
    pub duality_gaps: Vec<f64>,
    pub l: f64,
    /// Composite Lipschitz constant and `kappa = L / 2`, when `L_f` is known.
    pub lipschitz: Option<f64>,
    pub kappa: Option<f64>,
    /// Upper bounds `inner_tol (1 + ||u_n||_W)` for the update errors.
    pub xi_bounds: Vec<f64>,
    /// `eta_n` and the set-distance bound per step, when `kappa` is known.
    pub eta: Vec<f64>,
    pub dist_set_bounds: Vec<f64>,
    /// Localization ball `B(u_0 + h*_0 / 2, r_0 / 2)` in the `W`-norm.
    pub localization_center: Vector,
    pub localization_radius: f64,
    pub converged: bool,
}

impl GelfandGrid {
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Interior nodes per component.
    pub fn interior(&self) -> usize {
        self.nodes.len()
    }

    /// Length of grid vectors, `2 (N - 1)`.
    pub fn dim(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weight of every interior node, `1 / N`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn gelfand(&self) -> &GelfandData {
        &self.gelfand
    }

    pub fn rhs(&self) -> &PointwiseMap {
        &self.rhs
    }

    /// Samples `(a, b)` at the interior nodes.
    pub fn from_components(&self, a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> Vector {
        let n = self.nodes.len();
        DVector::from_fn(2 * n, |i, _| if i < n { a(self.nodes[i]) } else { b(self.nodes[i - n]) })
    }

    /// Value of node `i` as a point of `R^2`.
    pub fn node_value(&self, v: &Vector, i: usize) -> [f64; 2] {
        let n = self.nodes.len();
        [v[i], v[n + i]]
    }

    fn check(&self, v: &Vector) -> Result<()> {
        crate::error::check_dim(self.dim(), v.len())
    }

    fn node_sets(&self, u: &Vector) -> Result<Vec<NodeSet>> {
        (0..self.nodes.len())
            .into_par_iter()
            .with_min_len(MIN_NODES_PER_TASK)
            .map(|i| Ok(compile(&self.rhs.eval(self.nodes[i], self.node_value(u, i))?)))
            .collect()
    }

    fn weighted_support(&self, sets: &[NodeSet], v: &Vector) -> Result<f64> {
        let terms: Vec<f64> = (0..sets.len())
            .into_par_iter()
            .with_min_len(MIN_NODES_PER_TASK)
            .map(|i| sets[i].support(self.node_value(v, i)))
            .collect::<Result<_>>()?;
        // sequential sum keeps the result independent of the thread count
        Ok(self.weight * terms.iter().sum::<f64>())
    }

    /// `sum_i w_i sigma(v_i, f(x_i, u_i))`.
    pub fn nemytskii_support(&self, u: &Vector, v: &Vector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        self.weighted_support(&self.node_sets(u)?, v)
    }

    /// Pointwise maximizers `h_v(x_i)` of `(v_i, .)` over `f(x_i, u_i)`.
    pub fn nemytskii_selection(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        self.check(u)?;
        self.check(v)?;
        let sets = self.node_sets(u)?;
        let n = self.nodes.len();
        let mut out = DVector::zeros(2 * n);
        for (i, set) in sets.iter().enumerate() {
            let p = set.support_point(self.node_value(v, i))?;
            out[i] = p[0];
            out[n + i] = p[1];
        }
        Ok(out)
    }

    /// `I(h) = 1/2 h'Gh + h'Ku + sum_i w_i sigma(-h_i, f(x_i, u_i))`.
    pub fn dual_functional(&self, u: &Vector, h: &Vector) -> Result<f64> {
        self.check(u)?;
        self.check(h)?;
        let sets = self.node_sets(u)?;
        let ku = self.gelfand.v_space().lower(u)?.0;
        self.objective(&sets, &ku, h)
    }

    fn objective(&self, sets: &[NodeSet], ku: &Vector, h: &Vector) -> Result<f64> {
        let w = self.gelfand.w_space();
        let quad = 0.5 * w.inner_unchecked(h.as_slice(), h.as_slice());
        Ok(quad + h.dot(ku) + self.weighted_support(sets, &-h)?)
    }

    /// Minimizes `I` by accelerated proximal gradient from `h = 0`.
    pub fn projection_step(&self, u: &Vector, opts: &PdiOptions) -> Result<ProjectionStep> {
        self.check(u)?;
        if !(opts.inner_tol > 0.0) || opts.inner_max_iters == 0 {
            return Err(Error::InvalidArgument("inner tolerance and iteration cap must be positive".into()));
        }
        let w = self.gelfand.w_space();
        let sets = self.node_sets(u)?;
        let ku = self.gelfand.v_space().lower(u)?.0;
        let n = self.nodes.len();
        let weight = self.weight;
        let mut failure: Option<Error> = None;

        let mut note = |r: Result<f64>| match r {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let w_norm = |d: &Vector| w.inner_unchecked(d.as_slice(), d.as_slice()).max(0.0).sqrt();
        let prox_failure = std::sync::Mutex::new(None);

        let out = fista::minimize(
            DVector::zeros(2 * n),
            FistaOptions {
                step: 1.0 / w.lambda_max_bound(),
                max_iters: opts.inner_max_iters,
                tol: opts.inner_tol,
            },
            "projection step",
            |h| note(self.objective(&sets, &ku, h)),
            |h| {
                let mut g = DVector::zeros(2 * n);
                w.apply_into(h.as_slice(), g.as_mut_slice());
                g + &ku
            },
            |z, t| {
                let s = t * weight;
                let pts: Result<Vec<[f64; 2]>> = (0..n)
                    .into_par_iter()
                    .with_min_len(MIN_NODES_PER_TASK)
                    .map(|i| sets[i].prox_neg([z[i], z[n + i]], s))
                    .collect();
                match pts {
                    Ok(pts) => {
                        let mut out = z;
                        for (i, p) in pts.into_iter().enumerate() {
                            out[i] = p[0];
                            out[n + i] = p[1];
                        }
                        out
                    }
                    Err(e) => {
                        prox_failure.lock().expect("unpoisoned").get_or_insert(e);
                        z
                    }
                }
            },
            w_norm,
        );
        if let Some(e) = failure.take().or(prox_failure.into_inner().expect("unpoisoned")) {
            return Err(e);
        }
        let out = out?;
        Ok(ProjectionStep {
            residual: w_norm(&out.x),
            h: out.x,
            inner_iterations: out.iterations,
            objective: out.objective,
        })
    }

    /// Runs `u <- u + h*(u) / 2` from `u0`.
    ///
    /// Refuses unless the composite contraction factor is known and below 1,
    /// or `opts.allow_unjustified` is set. Fails with [`Error::Divergence`]
    /// once the residual has grown for more than 3 consecutive steps.
    pub fn solve_pdi(&self, u0: &Vector, opts: &PdiOptions) -> Result<PdiReport> {
        self.check(u0)?;
        if !(opts.tol_residual > 0.0) {
            return Err(Error::InvalidArgument("tol_residual must be > 0".into()));
        }
        let constants = match self.rhs.lipschitz {
            Some(lf) => Some(composite_constants(-1.0, self.rhs.l_f, lf, self.gelfand.c_vh())?),
            None => None,
        };
        let justified = constants.is_some_and(|c| c.admissible);
        if !justified && !opts.allow_unjustified {
            return Err(Error::Precondition(match constants {
                Some(c) => format!("composite contraction factor {} is not below 1", c.kappa),
                None => "no Lipschitz constant for the right-hand side; contraction is not guaranteed".into(),
            }));
        }

        let w = self.gelfand.w_space();
        let mut u = u0.clone();
        let mut iterates = opts.record_iterates.then(Vec::new);
        let mut residuals = Vec::new();
        let mut inner_iterations = Vec::new();
        let mut duality_gaps = Vec::new();
        let mut xi_bounds = Vec::new();
        let mut localization = None;
        let mut rising = 0usize;
        let mut converged = false;

        for n in 0..=opts.max_steps {
            if let Some(list) = iterates.as_mut() {
                list.push(u.clone());
            }
            let step = self.projection_step(&u, opts)?;
            let r = step.residual;
            if n == 0 {
                localization = Some((&u + &step.h * 0.5, 0.5 * r));
            }
            if let Some(&prev) = residuals.last() {
                rising = if r > prev { rising + 1 } else { 0 };
            }
            residuals.push(r);
            inner_iterations.push(step.inner_iterations);
            duality_gaps.push((step.objective + 0.5 * r * r).abs());
            if rising > 3 {
                return Err(Error::Divergence {
                    step: n,
                    consecutive: rising,
                    residual: r,
                    residuals,
                });
            }
            if r <= opts.tol_residual {
                converged = true;
                break;
            }
            if n == opts.max_steps {
                break;
            }
            xi_bounds.push(opts.inner_tol * (1.0 + w.norm(&u)?));
            u += &step.h * 0.5;
        }

        let mut eta = Vec::new();
        let mut dist_set_bounds = Vec::new();
        if let Some(c) = constants.filter(|c| c.admissible) {
            for n in 0..residuals.len() {
                let b = apriori_bounds(residuals[0], c.l, c.lipschitz, &xi_bounds, n)?;
                eta.push(b.eta);
                dist_set_bounds.push(b.dist_set);
            }
        }
        let (localization_center, localization_radius) = localization.expect("one step evaluated");
        Ok(PdiReport {
            solution: u,
            iterates,
            residuals,
            inner_iterations,
            duality_gaps,
            l: -1.0,
            lipschitz: constants.map(|c| c.lipschitz),
            kappa: constants.map(|c| c.kappa),
            xi_bounds,
            eta,
            dist_set_bounds,
            localization_center,
            localization_radius,
            converged,
        })
    }
}

/// Assembles the grid with `N` cells for the right-hand side `rhs`.
///
/// Fails when `N < 4` or when `lH = l_f` violates `l_f < 1 / c^2` for the
/// discrete embedding constant `c`.
pub fn build_grid(cells: usize, rhs: PointwiseMap) -> Result<GelfandGrid> {
    if cells < 4 {
        return Err(Error::InvalidArgument("N must be >= 4".into()));
    }
    let h = 1.0 / cells as f64;
    let n = cells - 1;
    let diag = DVector::from_element(2 * n, 2.0 / h);
    // the two components do not couple
    let off = DVector::from_fn(2 * n - 1, |i, _| if i == n - 1 { 0.0 } else { -1.0 / h });
    let k = GramSpace::tridiagonal(diag, off)?;
    let m = GramSpace::diagonal(DVector::from_element(2 * n, h))?;
    let gelfand = GelfandData::new(k, m, -1.0, rhs.l_f)?;
    Ok(GelfandGrid {
        cells,
        nodes: (1..cells).map(|i| i as f64 * h).collect(),
        weight: h,
        gelfand,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton(l_f: f64, g: fn(f64, [f64; 2]) -> [f64; 2]) -> PointwiseMap {
        PointwiseMap::new("singleton", l_f, move |x, s| Ok(ConvexSet::point(vec2(g(x, s)))))
    }

    #[test]
    fn grid_assembly_at_n4() {
        let grid = build_grid(4, builtin_rhs("bsp1", RhsParams::default()).unwrap()).unwrap();
        assert_eq!(grid.dim(), 6);
        assert_eq!(grid.nodes(), &[0.25, 0.5, 0.75]);
        let k = grid.gelfand().v_space().to_dense();
        let m = grid.gelfand().h_space().to_dense();
        let w = grid.gelfand().w_space().to_dense();
        for i in 0..6 {
            assert_eq!(k[(i, i)], 8.0);
            assert_eq!(m[(i, i)], 0.25);
        }
        assert_eq!(k[(2, 3)], 0.0);
        assert_eq!(k[(0, 1)], -4.0);
        assert!((w - (k + m)).abs().max() < 1e-15);
    }

    #[test]
    fn grid_rejections() {
        let rhs = builtin_rhs("bsp1", RhsParams::default()).unwrap();
        assert!(matches!(build_grid(3, rhs.clone()), Err(Error::InvalidArgument(_))));
        let hot = builtin_rhs("bsp1", RhsParams { l_f: Some(20.0), radius: None }).unwrap();
        assert!(matches!(build_grid(4, hot), Err(Error::GelfandConstraint { .. })));
        assert!(builtin_rhs("bsp3", RhsParams::default()).is_err());
    }

    #[test]
    fn builtin_values() {
        let e2 = GramSpace::euclidean(2);
        let f = builtin_rhs("bsp1", RhsParams::default()).unwrap();
        let set = f.eval(0.3, [0.0, 0.0]).unwrap();
        let NodeSet::Disc { c, r } = compile(&set) else { panic!() };
        assert_eq!((c, r), ([0.0, 0.0], 10.0));
        assert_eq!(f.lipschitz(), Some(1.5));
        assert_eq!(set.support(&vec2([0.0, 1.0]), &e2).unwrap(), 10.0);

        let f = builtin_rhs("bsp2", RhsParams::default()).unwrap();
        let NodeSet::Disc { c, r } = compile(&f.eval(0.0, [0.0, 0.0]).unwrap()) else { panic!() };
        assert_eq!((c, r), ([1.0, 1.0], 5.0));
        assert_eq!(f.lipschitz(), None);
    }

    #[test]
    fn node_prox_matches_generic_prox() {
        let e2 = GramSpace::euclidean(2);
        let set = ConvexSet::sum(
            ConvexSet::point(vec2([0.4, -1.0])),
            ConvexSet::ball(vec2([0.0, 0.0]), 0.7, e2.clone()).unwrap(),
        )
        .unwrap();
        let fast = compile(&set);
        let slow = NodeSet::General(set.clone());
        for y in [[3.0, 1.0], [0.1, 0.2], [-2.0, 5.0]] {
            for s in [0.01, 0.5, 3.0] {
                let a = fast.prox_neg(y, s).unwrap();
                let b = slow.prox_neg(y, s).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
                let sa = fast.support(y).unwrap();
                assert!((sa - set.support(&vec2(y), &e2).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nemytskii_examples() {
        let zero = singleton(-1.0, |_, _| [0.0, 0.0]);
        let grid = build_grid(4, zero).unwrap();
        let u = grid.from_components(|x| x, |x| -x);
        let v = grid.from_components(|x| x * x, |x| 1.0 - x);
        assert_eq!(grid.nemytskii_support(&u, &v).unwrap(), 0.0);

        let f = builtin_rhs("bsp1", RhsParams { l_f: None, radius: Some(2.0) }).unwrap();
        let grid = build_grid(4, f).unwrap();
        let u = DVector::zeros(6);
        let expected: f64 = (0..3)
            .map(|i| {
                let p = grid.node_value(&v, i);
                0.25 * 2.0 * p[0].hypot(p[1])
            })
            .sum();
        assert!((grid.nemytskii_support(&u, &v).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn selection_reproduces_support() {
        let f = builtin_rhs("bsp2", RhsParams::default()).unwrap();
        let grid = build_grid(16, f).unwrap();
        let u = builtin_initial("bsp2", &grid).unwrap();
        let v = grid.from_components(|x| (7.0 * x).sin(), |x| x - 0.5);
        let sel = grid.nemytskii_selection(&u, &v).unwrap();
        let pairing = grid.gelfand().h_space().inner(&v, &sel).unwrap();
        assert!((pairing - grid.nemytskii_support(&u, &v).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn dual_functional_basics() {
        let f = builtin_rhs("bsp1", RhsParams::default()).unwrap();
        let grid = build_grid(8, f).unwrap();
        let u = builtin_initial("bsp1", &grid).unwrap();
        assert_eq!(grid.dual_functional(&u, &DVector::zeros(14)).unwrap(), 0.0);

        // u = 0 and a centered ball: I(h) = |h|_W^2 / 2 + R sum w |h_i|
        let u0 = DVector::zeros(14);
        let h = grid.from_components(|x| x.sin(), |x| x * x);
        let w = grid.gelfand().w_space().norm(&h).unwrap();
        let tail: f64 = (0..7).map(|i| 0.125 * 10.0 * {
            let p = grid.node_value(&h, i);
            p[0].hypot(p[1])
        }).sum();
        let val = grid.dual_functional(&u0, &h).unwrap();
        assert!((val - (0.5 * w * w + tail)).abs() < 1e-12);
        let step = grid.projection_step(&u0, &PdiOptions::default()).unwrap();
        assert_eq!(step.residual, 0.0);
    }

    #[test]
    fn singleton_projection_matches_linear_solve() {
        // I(h) = 1/2 h'Gh + h'(Ku - M g), so h* = G^{-1}(M g - K u)
        let f = singleton(-1.0, |x, s| [-s[0] + x, -s[1] - s[0] * 0.5]);
        let grid = build_grid(8, f.clone()).unwrap();
        let u = grid.from_components(|x| (3.0 * x).sin(), |x| x * (1.0 - x));
        let g = DVector::from_fn(14, |i, _| {
            let node = i % 7;
            let x = grid.nodes()[node];
            let s = grid.node_value(&u, node);
            let val = [-s[0] + x, -s[1] - s[0] * 0.5];
            val[i / 7]
        });
        let gel = grid.gelfand();
        let rhs = gel.h_space().lower(&g).unwrap().0 - gel.v_space().lower(&u).unwrap().0;
        let oracle = gel.w_space().riesz(&crate::space::Functional(rhs)).unwrap();
        let opts = PdiOptions {
            inner_tol: 1e-13,
            ..Default::default()
        };
        let step = grid.projection_step(&u, &opts).unwrap();
        assert!((&step.h - &oracle).norm() <= 1e-8 * oracle.norm());
        let r = step.residual;
        assert!((step.objective + 0.5 * r * r).abs() <= 1e-10 * (1.0 + r * r));
    }

    #[test]
    fn linear_singleton_halves_residual() {
        // g = -s: u_{n+1} = u_n / 2, so the residual halves every step
        let f = singleton(-1.0, |_, s| [-s[0], -s[1]]).with_lipschitz(1.0);
        let grid = build_grid(16, f).unwrap();
        let u0 = grid.from_components(|x| (PI * x).sin(), |x| x * (1.0 - x));
        let opts = PdiOptions {
            inner_tol: 1e-12,
            max_steps: 5,
            ..Default::default()
        };
        let rep = grid.solve_pdi(&u0, &opts).unwrap();
        for w in rep.residuals.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn solution_has_zero_residual() {
        // u = sin(pi x) solves u'' + pi_h^2 u = 0 for the discrete eigenvalue
        let h: f64 = 1.0 / 32.0;
        let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let f = PointwiseMap::new("eig", -1.0, move |_, s| {
            Ok(ConvexSet::point(vec2([lam * s[0], lam * s[1]])))
        });
        let grid = build_grid(32, f).unwrap();
        let u = grid.from_components(|x| (PI * x).sin(), |x| 0.3 * (PI * x).sin());
        let step = grid.projection_step(&u, &PdiOptions::default()).unwrap();
        assert!(step.residual <= 1e-9, "{}", step.residual);
    }

    #[test]
    fn refuses_without_constants() {
        let f = builtin_rhs("bsp2", RhsParams::default()).unwrap();
        let grid = build_grid(8, f).unwrap();
        let u0 = builtin_initial("bsp2", &grid).unwrap();
        assert!(matches!(grid.solve_pdi(&u0, &PdiOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn divergence_is_reported() {
        // g = +4 s with l_f chosen small enough to keep W definite: the
        // residual grows every step.
        let f = PointwiseMap::new("anti", -1.0, |_, s| Ok(ConvexSet::point(vec2([40.0 * s[0], 40.0 * s[1]]))));
        let grid = build_grid(8, f).unwrap();
        let u0 = grid.from_components(|x| (PI * x).sin(), |_| 0.0);
        let opts = PdiOptions {
            allow_unjustified: true,
            max_steps: 20,
            ..Default::default()
        };
        match grid.solve_pdi(&u0, &opts) {
            Err(Error::Divergence { consecutive, residuals, .. }) => {
                assert_eq!(consecutive, 4);
                assert_eq!(residuals.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }
}
