//! Finite-dimensional Hilbert spaces given by a Gram matrix.
//!
//! A [`GramSpace`] fixes a basis of `R^n` together with the symmetric positive
//! definite matrix `G` of inner products between basis vectors, so that
//! `(a, b) = a^T G b`. Elements of the space are coordinate vectors
//! ([`Vector`]); elements of the dual space are [`Functional`]s holding the
//! action on the basis vectors. The Riesz map solves `G c = phi`.
//!
//! Gram matrices are stored diagonal, symmetric tridiagonal (1D finite
//! element spaces) or dense, and are factorized once at construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Coordinates of an element of a [`GramSpace`].
pub type Vector = DVector<f64>;

/// Condition estimates above this value are rejected at construction.
pub const MAX_CONDITION: f64 = 1e14;

const SYMMETRY_TOL: f64 = 1e-12;

/// Element of the dual space, stored as its action `<phi, e_i>` on the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional(pub Vector);

impl Functional {
    pub fn new(coords: Vector) -> Self {
        Self(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn coords(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Dual pairing `<phi, v>`.
    pub fn apply(&self, v: &Vector) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        Ok(self.0.dot(v))
    }
}

enum Storage {
    Diagonal {
        diag: Vector,
    },
    Tridiagonal {
        diag: Vector,
        off: Vector,
        chol_diag: Vector,
        chol_off: Vector,
    },
    Dense {
        matrix: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

struct Inner {
    dim: usize,
    storage: Storage,
    lambda_max_bound: f64,
    condition: f64,
}

/// Finite-dimensional real Hilbert space `(R^n, a^T G b)`.
///
/// Cloning is cheap; the Gram data and its factorization are shared.
#[derive(Clone)]
pub struct GramSpace {
    inner: Arc<Inner>,
}

impl fmt::Debug for GramSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.inner.storage {
            Storage::Diagonal { .. } => "diagonal",
            Storage::Tridiagonal { .. } => "tridiagonal",
            Storage::Dense { .. } => "dense",
        };
        f.debug_struct("GramSpace")
            .field("dim", &self.inner.dim)
            .field("storage", &kind)
            .field("condition", &self.inner.condition)
            .finish()
    }
}

impl PartialEq for GramSpace {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.inner, &other.inner) {
            return true;
        }
        if self.dim() != other.dim() {
            return false;
        }
        match (&self.inner.storage, &other.inner.storage) {
            (Storage::Diagonal { diag: a }, Storage::Diagonal { diag: b }) => a == b,
            (
                Storage::Tridiagonal {
                    diag: a, off: ao, ..
                },
                Storage::Tridiagonal {
                    diag: b, off: bo, ..
                },
            ) => a == b && ao == bo,
            _ => self.to_dense() == other.to_dense(),
        }
    }
}

impl GramSpace {
    /// `R^n` with the standard inner product.
    pub fn euclidean(dim: usize) -> Self {
        Self::diagonal(DVector::from_element(dim.max(1), 1.0)).expect("identity gram is valid")
    }

    pub fn diagonal(diag: Vector) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty gram matrix".into()));
        }
        if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let max = diag.max();
        let min = diag.min();
        let condition = max / min;
        check_condition(condition)?;
        Ok(Self::from_storage(diag.len(), Storage::Diagonal { diag }, max, condition))
    }

    /// Symmetric tridiagonal Gram matrix with main diagonal `diag` and
    /// sub/super-diagonal `off` (`off.len() == diag.len() - 1`).
    pub fn tridiagonal(diag: Vector, off: Vector) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty gram matrix".into()));
        }
        check_dim(n - 1, off.len())?;
        if off.iter().all(|&o| o == 0.0) {
            return Self::diagonal(diag);
        }
        let mut chol_diag = DVector::zeros(n);
        let mut chol_off = DVector::zeros(n - 1);
        for i in 0..n {
            let mut pivot = diag[i];
            if i > 0 {
                pivot -= chol_off[i - 1] * chol_off[i - 1];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            chol_diag[i] = pivot.sqrt();
            if i + 1 < n {
                chol_off[i] = off[i] / chol_diag[i];
            }
        }
        // Gershgorin upper bound for the largest eigenvalue.
        let lambda_max_bound = (0..n)
            .map(|i| {
                let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { off[i].abs() } else { 0.0 };
                diag[i] + left + right
            })
            .fold(f64::MIN, f64::max);
        let storage = Storage::Tridiagonal {
            diag,
            off,
            chol_diag,
            chol_off,
        };
        let mut space = Self::from_storage(n, storage, lambda_max_bound, 1.0);
        let lambda_min = space.lambda_min_estimate();
        let condition = lambda_max_bound / lambda_min;
        check_condition(condition)?;
        Arc::get_mut(&mut space.inner)
            .expect("freshly constructed")
            .condition = condition;
        Ok(space)
    }

    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty gram matrix".into()));
        }
        check_dim(n, matrix.ncols())?;
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asymmetry = (&matrix - matrix.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let symmetric = (&matrix + matrix.transpose()) * 0.5;
        let eigen = SymmetricEigen::new(symmetric.clone());
        let max = eigen.eigenvalues.max();
        let min = eigen.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        check_condition(max / min)?;
        let chol = Cholesky::new(symmetric.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self::from_storage(
            n,
            Storage::Dense {
                matrix: symmetric,
                chol,
            },
            max,
            max / min,
        ))
    }

    fn from_storage(dim: usize, storage: Storage, lambda_max_bound: f64, condition: f64) -> Self {
        Self {
            inner: Arc::new(Inner {
                dim,
                storage,
                lambda_max_bound,
                condition,
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Upper bound on the largest eigenvalue of the Gram matrix (exact for
    /// diagonal and dense storage, Gershgorin for tridiagonal).
    pub fn lambda_max_bound(&self) -> f64 {
        self.inner.lambda_max_bound
    }

    pub fn condition_estimate(&self) -> f64 {
        self.inner.condition
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.inner.storage, Storage::Diagonal { .. })
    }

    /// Diagonal entries, materialized for every storage kind.
    pub fn diagonal_entries(&self) -> Vector {
        match &self.inner.storage {
            Storage::Diagonal { diag } | Storage::Tridiagonal { diag, .. } => diag.clone(),
            Storage::Dense { matrix, .. } => matrix.diagonal(),
        }
    }

    /// Sub-diagonal of tridiagonal storage (`None` otherwise).
    pub fn off_diagonal(&self) -> Option<&Vector> {
        match &self.inner.storage {
            Storage::Tridiagonal { off, .. } => Some(off),
            _ => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        match &self.inner.storage {
            Storage::Diagonal { diag } => DMatrix::from_diagonal(diag),
            Storage::Tridiagonal { diag, off, .. } => {
                let mut m = DMatrix::from_diagonal(diag);
                for i in 0..n - 1 {
                    m[(i, i + 1)] = off[i];
                    m[(i + 1, i)] = off[i];
                }
                m
            }
            Storage::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// `a^T G b`.
    pub fn inner(&self, a: &Vector, b: &Vector) -> Result<f64> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())?;
        Ok(self.inner_unchecked(a.as_slice(), b.as_slice()))
    }

    pub fn norm(&self, a: &Vector) -> Result<f64> {
        Ok(self.inner(a, a)?.max(0.0).sqrt())
    }

    pub fn distance(&self, a: &Vector, b: &Vector) -> Result<f64> {
        check_dim(a.len(), b.len())?;
        self.norm(&(a - b))
    }

    /// The functional `G a`, i.e. `v -> (a, v)`.
    pub fn lower(&self, a: &Vector) -> Result<Functional> {
        check_dim(self.dim(), a.len())?;
        let mut out = DVector::zeros(self.dim());
        self.apply_into(a.as_slice(), out.as_mut_slice());
        Ok(Functional(out))
    }

    /// Riesz representative: the `c` with `(c, v) = <phi, v>` for all `v`.
    pub fn riesz(&self, phi: &Functional) -> Result<Vector> {
        check_dim(self.dim(), phi.dim())?;
        let mut out = phi.0.clone();
        self.solve_in_place(out.as_mut_slice());
        Ok(out)
    }

    /// `sup_{v != 0} <phi, v> / ||v||`.
    pub fn dual_norm(&self, phi: &Functional) -> Result<f64> {
        let c = self.riesz(phi)?;
        Ok(phi.0.dot(&c).max(0.0).sqrt())
    }

    /// `alpha * G_self + beta * G_other`, keeping the sparsest common storage.
    pub fn combine(&self, alpha: f64, other: &GramSpace, beta: f64) -> Result<GramSpace> {
        check_dim(self.dim(), other.dim())?;
        use Storage::*;
        match (&self.inner.storage, &other.inner.storage) {
            (Diagonal { diag: a }, Diagonal { diag: b }) => Self::diagonal(a * alpha + b * beta),
            (Tridiagonal { diag: a, off, .. }, Diagonal { diag: b }) => {
                Self::tridiagonal(a * alpha + b * beta, off * alpha)
            }
            (Diagonal { diag: a }, Tridiagonal { diag: b, off, .. }) => {
                Self::tridiagonal(a * alpha + b * beta, off * beta)
            }
            (
                Tridiagonal {
                    diag: a, off: ao, ..
                },
                Tridiagonal {
                    diag: b, off: bo, ..
                },
            ) => Self::tridiagonal(a * alpha + b * beta, ao * alpha + bo * beta),
            _ => Self::dense(self.to_dense() * alpha + other.to_dense() * beta),
        }
    }

    pub(crate) fn inner_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.inner.storage {
            Storage::Diagonal { diag } => a
                .iter()
                .zip(b)
                .zip(diag.iter())
                .map(|((x, y), d)| x * d * y)
                .sum(),
            Storage::Tridiagonal { diag, off, .. } => {
                let n = a.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let mut gb = diag[i] * b[i];
                    if i > 0 {
                        gb += off[i - 1] * b[i - 1];
                    }
                    if i + 1 < n {
                        gb += off[i] * b[i + 1];
                    }
                    acc += a[i] * gb;
                }
                acc
            }
            Storage::Dense { matrix, .. } => {
                let av = DVector::from_column_slice(a);
                let bv = DVector::from_column_slice(b);
                av.dot(&(matrix * bv))
            }
        }
    }

    /// `out = G x`.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.inner.storage {
            Storage::Diagonal { diag } => {
                for ((o, xi), d) in out.iter_mut().zip(x).zip(diag.iter()) {
                    *o = d * xi;
                }
            }
            Storage::Tridiagonal { diag, off, .. } => {
                let n = x.len();
                for i in 0..n {
                    let mut v = diag[i] * x[i];
                    if i > 0 {
                        v += off[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        v += off[i] * x[i + 1];
                    }
                    out[i] = v;
                }
            }
            Storage::Dense { matrix, .. } => {
                let y = matrix * DVector::from_column_slice(x);
                out.copy_from_slice(y.as_slice());
            }
        }
    }

    /// Overwrites `rhs` with `G^{-1} rhs`.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        match &self.inner.storage {
            Storage::Diagonal { diag } => {
                for (r, d) in rhs.iter_mut().zip(diag.iter()) {
                    *r /= d;
                }
            }
            Storage::Tridiagonal {
                chol_diag,
                chol_off,
                ..
            } => {
                let n = rhs.len();
                for i in 0..n {
                    if i > 0 {
                        rhs[i] -= chol_off[i - 1] * rhs[i - 1];
                    }
                    rhs[i] /= chol_diag[i];
                }
                for i in (0..n).rev() {
                    if i + 1 < n {
                        rhs[i] -= chol_off[i] * rhs[i + 1];
                    }
                    rhs[i] /= chol_diag[i];
                }
            }
            Storage::Dense { chol, .. } => {
                let mut v = DVector::from_column_slice(rhs);
                chol.solve_mut(&mut v);
                rhs.copy_from_slice(v.as_slice());
            }
        }
    }

    /// Rayleigh-quotient estimate of the smallest eigenvalue by inverse
    /// iteration. Never below the true value.
    fn lambda_min_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.754_877_666).fract()).collect();
        let mut gx = vec![0.0; n];
        let mut rq = f64::INFINITY;
        for _ in 0..60 {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
            self.apply_into(&x, &mut gx);
            let next = x.iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>();
            let done = (rq - next).abs() <= 1e-12 * next.abs();
            rq = next;
            if done {
                break;
            }
            self.solve_in_place(&mut x);
        }
        rq
    }
}

fn check_condition(estimate: f64) -> Result<()> {
    if estimate.is_finite() && estimate <= MAX_CONDITION {
        Ok(())
    } else {
        Err(Error::IllConditioned { estimate })
    }
}
