//! Damped projection iteration for `ybar in F(x)` with an `l`-ROSL
//! (`l < 0`), `L`-Lipschitz map:
//!
//! ```text
//! v_n     = ybar - Proj(ybar, F(x_n))
//! x_{n+1} = x_n + v_n / (2l) + xi_n
//! ```
//!
//! The residual `||v_n||` contracts with ratio `kappa = -L / (2l) < 1`
//! (plus the effect of the perturbations `xi_n`), which also yields
//! a-priori distance bounds and a localization ball for a solution.

use crate::error::{check_dim, Error, Result};
use crate::maps::SetValuedMap;
use crate::sets::{ConvexSet, ProjectionOptions};
use crate::space::{GramSpace, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `||v_n|| <= tol_residual`.
    pub tol_residual: f64,
    /// Perturbations `xi_0, xi_1, ...`; zero past the end.
    pub xi_schedule: Vec<Vector>,
    pub record_iterates: bool,
    pub projection: ProjectionOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol_residual: 1e-10,
            xi_schedule: Vec::new(),
            record_iterates: false,
            projection: ProjectionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vector,
    /// `x_0, x_1, ...` when requested.
    pub iterates: Option<Vec<Vector>>,
    /// `||v_n||` for every evaluated iterate.
    pub residuals: Vec<f64>,
    pub l: f64,
    pub lipschitz: f64,
    pub kappa: f64,
    /// `eta_n` for each recorded step.
    pub eta: Vec<f64>,
    /// Bound on `dist(x_n, F^{-1}(ybar))` for each recorded step.
    pub dist_set_bounds: Vec<f64>,
    /// Bound on `||x_0 - xbar||` for the limit `xbar`.
    pub dist_point_bound: f64,
    /// Ball around `x_0 + v_0 / (2l)` that contains a solution.
    pub localization: ConvexSet,
    pub converged: bool,
}

impl SolveReport {
    /// Number of updates performed.
    pub fn steps(&self) -> usize {
        self.residuals.len() - 1
    }
}

/// Contraction factor `-L / (2l)`, checked to lie in `[0, 1)`.
pub fn contraction_factor(l: f64, lipschitz: f64) -> Result<f64> {
    if !(l < 0.0) {
        return Err(Error::Precondition(format!("need l < 0, got {l}")));
    }
    if !(lipschitz >= 0.0) {
        return Err(Error::Precondition(format!("need L >= 0, got {lipschitz}")));
    }
    let kappa = -lipschitz / (2.0 * l);
    if kappa >= 1.0 {
        return Err(Error::Precondition(format!(
            "contraction factor -L/(2l) = {kappa} is not below 1"
        )));
    }
    Ok(kappa)
}

pub fn solve(map: &SetValuedMap, ybar: &Vector, x0: &Vector, opts: &SolveOptions) -> Result<SolveReport> {
    let l = map
        .declared_l()
        .ok_or_else(|| Error::Precondition("map has no declared ROSL constant".into()))?;
    let lipschitz = map
        .declared_lipschitz()
        .ok_or_else(|| Error::Precondition("map has no declared Lipschitz constant".into()))?;
    let kappa = contraction_factor(l, lipschitz)?;
    if !(opts.tol_residual > 0.0) {
        return Err(Error::InvalidArgument("tol_residual must be > 0".into()));
    }
    let dom = map.domain();
    let cod = map.codomain();
    check_dim(dom.dim(), x0.len())?;
    check_dim(cod.dim(), ybar.len())?;
    check_dim(dom.dim(), cod.dim())?;
    for xi in &opts.xi_schedule {
        check_dim(dom.dim(), xi.len())?;
    }

    let mut x = x0.clone();
    let mut iterates = opts.record_iterates.then(Vec::new);
    let mut residuals = Vec::new();
    let mut v0_norm = 0.0;
    let mut localization = None;
    let mut converged = false;

    for n in 0..=opts.max_iters {
        if let Some(list) = iterates.as_mut() {
            list.push(x.clone());
        }
        let fx = map.eval(&x)?;
        let p = fx.project_with(ybar, cod, &opts.projection)?.point;
        let v = ybar - &p;
        let r = cod.norm(&v)?;
        residuals.push(r);
        if n == 0 {
            v0_norm = r;
            localization = Some(localization_ball(&x, &p, ybar, l, dom)?);
        }
        if r <= opts.tol_residual {
            converged = true;
            break;
        }
        if n == opts.max_iters {
            break;
        }
        x += v / (2.0 * l);
        if let Some(xi) = opts.xi_schedule.get(n) {
            x += xi;
        }
    }

    let xi_norms: Vec<f64> = opts
        .xi_schedule
        .iter()
        .map(|xi| dom.norm(xi))
        .collect::<Result<_>>()?;
    let mut eta = Vec::with_capacity(residuals.len());
    let mut dist_set_bounds = Vec::with_capacity(residuals.len());
    for n in 0..residuals.len() {
        let b = apriori_bounds(v0_norm, l, lipschitz, &xi_norms, n)?;
        eta.push(b.eta);
        dist_set_bounds.push(b.dist_set);
    }
    let dist_point_bound = apriori_bounds(v0_norm, l, lipschitz, &xi_norms, 0)?.dist_point;

    Ok(SolveReport {
        solution: x,
        iterates,
        residuals,
        l,
        lipschitz,
        kappa,
        eta,
        dist_set_bounds,
        dist_point_bound,
        localization: localization.expect("at least one evaluation"),
        converged,
    })
}

/// `B(xt + (ybar - yt) / (2l), -||ybar - yt|| / (2l))` in `space`: for
/// `yt in F(xt)` this ball contains a solution of `ybar in F(x)`.
pub fn localization_ball(
    xt: &Vector,
    yt: &Vector,
    ybar: &Vector,
    l: f64,
    space: &GramSpace,
) -> Result<ConvexSet> {
    if !(l < 0.0) {
        return Err(Error::Precondition(format!("need l < 0, got {l}")));
    }
    check_dim(space.dim(), xt.len())?;
    let d = ybar - yt;
    let radius = -space.norm(&d)? / (2.0 * l);
    ConvexSet::ball(xt + d / (2.0 * l), radius, space.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriBounds {
    /// `eta_n = sum_{k=0}^{n} kappa^k ||xi_{n-k}||`.
    pub eta: f64,
    /// `-kappa^{n-1} ||v_0|| / (2l) + eta_{n-1}` for `n >= 1`; the point
    /// bound at `n = 0`.
    pub dist_set: f64,
    /// `-(1/(2l)) kappa^n / (1 - kappa) ||v_0|| + sum_{j >= n} eta_j`.
    pub dist_point: f64,
}

/// A-priori bounds for step `n`, with `||xi_j||` taken as zero for `j` past
/// the end of `xi_norms`.
pub fn apriori_bounds(v0_norm: f64, l: f64, lipschitz: f64, xi_norms: &[f64], n: usize) -> Result<AprioriBounds> {
    let kappa = contraction_factor(l, lipschitz)?;
    if v0_norm < 0.0 || xi_norms.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument("norms must be >= 0".into()));
    }
    let m = xi_norms.len();
    // eta_j for j < m by the recursion eta_j = kappa eta_{j-1} + ||xi_j||;
    // beyond that eta_j = kappa^{j-m+1} eta_{m-1}.
    let mut etas = Vec::with_capacity(m);
    let mut acc = 0.0;
    for xi in xi_norms {
        acc = kappa * acc + xi;
        etas.push(acc);
    }
    let eta_at = |j: usize| -> f64 {
        if m == 0 {
            0.0
        } else if j < m {
            etas[j]
        } else {
            etas[m - 1] * kappa.powi((j - m + 1) as i32)
        }
    };
    let eta = eta_at(n);

    let head: f64 = (n..m).map(|j| etas[j]).sum();
    let tail = if m == 0 {
        0.0
    } else {
        eta_at(n.max(m)) / (1.0 - kappa)
    };
    let dist_point = -kappa.powi(n as i32) / (1.0 - kappa) * v0_norm / (2.0 * l) + head + tail;
    let dist_set = if n == 0 {
        dist_point
    } else {
        -kappa.powi(n as i32 - 1) * v0_norm / (2.0 * l) + eta_at(n - 1)
    };
    Ok(AprioriBounds {
        eta,
        dist_set,
        dist_point,
    })
}

/// Lower bound on `||x - xt||` for every solution `x`: the caller passes
/// `min omega^{-1}(dist(ybar, F(xt)))` for a modulus of continuity `omega`
/// of `F`, see [`linear_modulus_inverse`] and [`power_modulus_inverse`].
pub fn solution_distance_lower_bound(omega_inverse_min: f64, dist_to_fxt: f64) -> Result<f64> {
    if !(omega_inverse_min >= 0.0) || !(dist_to_fxt >= 0.0) {
        return Err(Error::InvalidArgument("inputs must be >= 0".into()));
    }
    Ok(if dist_to_fxt == 0.0 { 0.0 } else { omega_inverse_min })
}

/// Inverse of `omega(t) = L t`.
pub fn linear_modulus_inverse(lipschitz: f64, dist: f64) -> Result<f64> {
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidArgument("modulus slope must be > 0".into()));
    }
    Ok(dist / lipschitz)
}

/// Inverse of `omega(t) = c t^p`.
pub fn power_modulus_inverse(c: f64, p: f64, dist: f64) -> Result<f64> {
    if !(c > 0.0) || !(p > 0.0) {
        return Err(Error::InvalidArgument("modulus needs c > 0 and p > 0".into()));
    }
    Ok((dist / c).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn v(x: &[f64]) -> Vector {
        DVector::from_column_slice(x)
    }

    fn e1() -> GramSpace {
        GramSpace::euclidean(1)
    }

    fn neg_identity() -> SetValuedMap {
        SetValuedMap::new(e1(), e1(), |x| Ok(ConvexSet::point(-x)))
            .with_rosl(-1.0)
            .with_lipschitz(1.0)
    }

    #[test]
    fn residuals_halve_for_negative_identity() {
        let opts = SolveOptions {
            max_iters: 10,
            record_iterates: true,
            ..Default::default()
        };
        let r = solve(&neg_identity(), &v(&[0.0]), &v(&[1.0]), &opts).unwrap();
        assert_eq!(r.kappa, 0.5);
        let xs = r.iterates.as_ref().unwrap();
        for (n, x) in xs.iter().enumerate() {
            assert_eq!(x[0], 0.5f64.powi(n as i32));
            assert_eq!(r.residuals[n], 0.5f64.powi(n as i32));
        }
        assert!(!r.converged);
        assert_eq!(r.steps(), 10);
    }

    #[test]
    fn start_at_solution() {
        let r = solve(&neg_identity(), &v(&[0.0]), &v(&[0.0]), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.residuals, vec![0.0]);
    }

    #[test]
    fn interval_map_from_outside() {
        // F(20) = [-30, -10], so v_0 = 10 and x_1 = 15; the limit is the
        // nearest end of F^{-1}(0) = [-10, 10].
        let m = SetValuedMap::new(e1(), e1(), |x| {
            ConvexSet::sum(
                ConvexSet::point(-x),
                ConvexSet::ball(v(&[0.0]), 10.0, e1()).unwrap(),
            )
        })
        .with_rosl(-1.0)
        .with_lipschitz(1.0);
        let opts = SolveOptions {
            record_iterates: true,
            ..Default::default()
        };
        let r = solve(&m, &v(&[0.0]), &v(&[20.0]), &opts).unwrap();
        assert_eq!(r.residuals[0], 10.0);
        assert_eq!(r.iterates.as_ref().unwrap()[1][0], 15.0);
        assert_eq!(r.residuals[1], 5.0);
        assert!(r.converged);
        assert!((r.solution[0] - 10.0).abs() < 1e-9);
        assert!((20.0 - r.solution[0]) <= r.dist_point_bound + 1e-9);
    }

    #[test]
    fn refuses_without_contraction() {
        let m = neg_identity().with_lipschitz(2.0);
        let err = solve(&m, &v(&[0.0]), &v(&[1.0]), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let bare = SetValuedMap::new(e1(), e1(), |x| Ok(ConvexSet::point(-x))).with_rosl(-1.0);
        assert!(solve(&bare, &v(&[0.0]), &v(&[1.0]), &SolveOptions::default()).is_err());
    }

    #[test]
    fn localization_examples() {
        let b = localization_ball(&v(&[0.0]), &v(&[1.0]), &v(&[0.0]), -1.0, &e1()).unwrap();
        let ConvexSet::Ball { center, radius, .. } = b else { panic!() };
        assert_eq!((center[0], radius), (0.5, 0.5));

        let b = localization_ball(&v(&[3.0]), &v(&[1.0]), &v(&[1.0]), -1.0, &e1()).unwrap();
        let ConvexSet::Ball { center, radius, .. } = b else { panic!() };
        assert_eq!((center[0], radius), (3.0, 0.0));

        let e2 = GramSpace::euclidean(2);
        let b = localization_ball(&v(&[0.0, 0.0]), &v(&[2.0, 0.0]), &v(&[0.0, 0.0]), -2.0, &e2).unwrap();
        let ConvexSet::Ball { center, radius, .. } = b else { panic!() };
        assert_eq!((center, radius), (v(&[0.5, 0.0]), 0.5));

        assert!(localization_ball(&v(&[0.0]), &v(&[1.0]), &v(&[0.0]), 0.0, &e1()).is_err());
    }

    #[test]
    fn apriori_examples() {
        let b = apriori_bounds(1.0, -1.0, 1.0, &[], 0).unwrap();
        assert_eq!(b.dist_point, 1.0);
        assert_eq!(b.dist_point, -1.0 / (2.0 * -1.0 + 1.0));
        for n in 0..5 {
            assert_eq!(apriori_bounds(1.0, -1.0, 1.0, &[], n).unwrap().eta, 0.0);
        }
        let b = apriori_bounds(0.0, -1.0, 1.0, &[1.0], 2).unwrap();
        assert_eq!(b.eta, 0.25);
        assert!(apriori_bounds(1.0, -1.0, 2.0, &[], 0).is_err());
    }

    #[test]
    fn point_bound_tail_matches_brute_force() {
        let xi = [0.3, 0.0, 0.2, 0.05];
        let (l, lip) = (-1.5, 1.2);
        let kappa: f64 = -lip / (2.0 * l);
        let eta = |j: usize| -> f64 {
            (0..=j)
                .map(|k| kappa.powi(k as i32) * xi.get(j - k).copied().unwrap_or(0.0))
                .sum()
        };
        for n in 0..7 {
            let b = apriori_bounds(2.0, l, lip, &xi, n).unwrap();
            assert!((b.eta - eta(n)).abs() < 1e-15);
            let tail: f64 = (n..400).map(eta).sum();
            let expected = -kappa.powi(n as i32) / (1.0 - kappa) * 2.0 / (2.0 * l) + tail;
            assert!((b.dist_point - expected).abs() < 1e-12);
            if n >= 1 {
                let set = -kappa.powi(n as i32 - 1) * 2.0 / (2.0 * l) + eta(n - 1);
                assert!((b.dist_set - set).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn set_bounds_decay_with_ratio_kappa() {
        let m = neg_identity().with_lipschitz(0.6);
        let r = solve(&m, &v(&[0.0]), &v(&[4.0]), &SolveOptions::default()).unwrap();
        for w in r.dist_set_bounds[1..].windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - r.kappa).abs() < 1e-12);
        }
    }

    #[test]
    fn modulus_helpers() {
        assert_eq!(linear_modulus_inverse(2.0, 3.0).unwrap(), 1.5);
        assert_eq!(power_modulus_inverse(1.0, 2.0, 4.0).unwrap(), 2.0);
        assert_eq!(solution_distance_lower_bound(2.0, 4.0).unwrap(), 2.0);
        assert_eq!(solution_distance_lower_bound(5.0, 0.0).unwrap(), 0.0);
        assert!(solution_distance_lower_bound(-1.0, 1.0).is_err());
    }
}
