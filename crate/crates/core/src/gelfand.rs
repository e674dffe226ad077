//! Mixed inner products over a Gelfand pair `V ⊂ H`.
//!
//! With `K` the Gram matrix of `V` and `M` that of `H`,
//! `(u, v)_W = -lV (u, v)_V - lH (u, v)_H`, which is an equivalent norm on
//! `V` as long as `lV < 0` and `lH < -lV / c^2`, `c` the embedding constant
//! of `||u||_H <= c ||u||_V`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::space::{Functional, GramSpace, Vector};

const EIGEN_MAX_ITERS: usize = 10_000;
const EIGEN_TOL: f64 = 1e-10;
const EQUIVALENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GelfandData {
    k: GramSpace,
    m: GramSpace,
    l_v: f64,
    l_h: f64,
    c_vh: f64,
    w: GramSpace,
}

impl GelfandData {
    pub fn new(k: GramSpace, m: GramSpace, l_v: f64, l_h: f64) -> Result<Self> {
        let c_vh = embedding_constant(&k, &m)?;
        Self::with_embedding_constant(k, m, l_v, l_h, c_vh)
    }

    /// As [`GelfandData::new`] with a precomputed embedding constant.
    pub fn with_embedding_constant(k: GramSpace, m: GramSpace, l_v: f64, l_h: f64, c_vh: f64) -> Result<Self> {
        check_dim(k.dim(), m.dim())?;
        if !(c_vh > 0.0) {
            return Err(Error::InvalidArgument(format!("embedding constant must be > 0, got {c_vh}")));
        }
        if !(l_v < 0.0) || !(l_h < -l_v / (c_vh * c_vh)) {
            return Err(Error::GelfandConstraint { l_v, l_h, c_vh });
        }
        let w = k.combine(-l_v, &m, -l_h)?;
        Ok(Self {
            k,
            m,
            l_v,
            l_h,
            c_vh,
            w,
        })
    }

    pub fn v_space(&self) -> &GramSpace {
        &self.k
    }

    pub fn h_space(&self) -> &GramSpace {
        &self.m
    }

    pub fn w_space(&self) -> &GramSpace {
        &self.w
    }

    pub fn l_v(&self) -> f64 {
        self.l_v
    }

    pub fn l_h(&self) -> f64 {
        self.l_h
    }

    pub fn c_vh(&self) -> f64 {
        self.c_vh
    }

    /// Factor `c / (2 sqrt(lV (lV + c^2 lH)))` bounding the `H`-distance of
    /// a solution from the localization center by `||ybar - yt||_{V*}`.
    /// Only valid for `lH <= 0`.
    pub fn h_localization_factor(&self) -> Result<f64> {
        if self.l_h > 0.0 {
            return Err(Error::Precondition("H-estimate needs lH <= 0".into()));
        }
        let c2 = self.c_vh * self.c_vh;
        Ok(self.c_vh / (2.0 * (self.l_v * (self.l_v + c2 * self.l_h)).sqrt()))
    }

    /// Bounds `(a, b)` with `a ||u||_V^2 <= ||u||_W^2 <= b ||u||_V^2`.
    pub fn primal_bounds(&self) -> (f64, f64) {
        let c2 = self.c_vh * self.c_vh;
        let plain = -self.l_v;
        let mixed = -(self.l_v + c2 * self.l_h);
        if self.l_h <= 0.0 {
            (plain, mixed)
        } else {
            (mixed, plain)
        }
    }

    /// Spot-checks the primal and dual equivalence chains and the
    /// W-identity on `samples` random vectors and functionals.
    pub fn check_norm_equivalence(&self, samples: usize, seed: u64) -> Result<NormEquivalenceReport> {
        if samples == 0 {
            return Err(Error::InvalidArgument("samples must be >= 1".into()));
        }
        let (a, b) = self.primal_bounds();
        let n = self.k.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = NormEquivalenceReport {
            samples,
            worst_violation: f64::NEG_INFINITY,
            worst_identity_error: 0.0,
        };
        for _ in 0..samples {
            let u: Vector = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let vv = self.k.inner(&u, &u)?;
            let hh = self.m.inner(&u, &u)?;
            let ww = self.w.inner(&u, &u)?;
            let identity = (ww - (-self.l_v * vv - self.l_h * hh)).abs() / ww;
            report.worst_identity_error = report.worst_identity_error.max(identity);
            report.record(a * vv, ww);
            report.record(ww, b * vv);

            let phi = Functional(DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0));
            let vd = self.k.dual_norm(&phi)?.powi(2);
            let wd = self.w.dual_norm(&phi)?.powi(2);
            report.record(vd / b, wd);
            report.record(wd, vd / a);
        }
        Ok(report)
    }
}

/// Outcome of [`GelfandData::check_norm_equivalence`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormEquivalenceReport {
    pub samples: usize,
    /// Largest `(lhs - rhs) / |rhs|` over all checked `lhs <= rhs`;
    /// negative means every inequality held with room to spare.
    pub worst_violation: f64,
    /// Largest relative error of `||u||_W^2 = -lV ||u||_V^2 - lH ||u||_H^2`.
    pub worst_identity_error: f64,
}

impl NormEquivalenceReport {
    fn record(&mut self, lhs: f64, rhs: f64) {
        let scale = rhs.abs().max(f64::MIN_POSITIVE);
        self.worst_violation = self.worst_violation.max((lhs - rhs) / scale);
    }

    pub fn holds(&self) -> bool {
        self.worst_violation <= EQUIVALENCE_TOL
    }
}

/// `c = 1 / sqrt(lambda_min(K, M))`, the smallest `c` with
/// `||u||_M <= c ||u||_K`, by inverse iteration on the pencil.
pub fn embedding_constant(k: &GramSpace, m: &GramSpace) -> Result<f64> {
    check_dim(k.dim(), m.dim())?;
    let n = k.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe19e);
    let mut u: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * rng.random::<f64>()).collect();
    let mut mu = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    let mut change = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITERS {
        m.apply_into(&u, &mut mu);
        k.solve_in_place(&mut mu);
        std::mem::swap(&mut u, &mut mu);
        let norm = m.inner_unchecked(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let next = k.inner_unchecked(&u, &u);
        change = (next - lambda).abs() / next;
        lambda = next;
        if change < EIGEN_TOL * 1e-2 {
            return Ok(1.0 / lambda.sqrt());
        }
    }
    // The Rayleigh quotient converges at twice the rate of the vector, so
    // a stalled relative change below the target still certifies it.
    if change < EIGEN_TOL {
        return Ok(1.0 / lambda.sqrt());
    }
    Err(Error::NonConvergence {
        context: "pencil eigenvalue",
        iterations: EIGEN_MAX_ITERS,
        last_change: change,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeConstants {
    pub l: f64,
    pub lipschitz: f64,
    pub kappa: f64,
    pub admissible: bool,
}

/// ROSL and Lipschitz constants of `-Laplace + N_f` in the `W`-norm for a
/// pointwise map with Lipschitz constant `lf_lip`, normalized to `lV = -1`.
///
/// For `lH <= 0`: `L = 1 + c^2 Lf / (1 - c^2 lH)`; for `lH >= 0`:
/// `L = (1 + c^2 Lf) / (1 - c^2 lH)`. Both give `l = -1`, `kappa = L / 2`.
pub fn composite_constants(l_v: f64, l_h: f64, lf_lip: f64, c_vh: f64) -> Result<CompositeConstants> {
    if l_v != -1.0 {
        return Err(Error::Unsupported(format!(
            "composite constants are only defined for lV = -1, got {l_v}"
        )));
    }
    if !(c_vh > 0.0) || !(lf_lip >= 0.0) {
        return Err(Error::InvalidArgument("need c > 0 and Lf >= 0".into()));
    }
    let c2 = c_vh * c_vh;
    if !(l_h < 1.0 / c2) {
        return Err(Error::GelfandConstraint { l_v, l_h, c_vh });
    }
    let lipschitz = if l_h <= 0.0 {
        1.0 + c2 * lf_lip / (1.0 - c2 * l_h)
    } else {
        (1.0 + c2 * lf_lip) / (1.0 - c2 * l_h)
    };
    let kappa = lipschitz / 2.0;
    Ok(CompositeConstants {
        l: -1.0,
        lipschitz,
        kappa,
        admissible: kappa < 1.0,
    })
}
