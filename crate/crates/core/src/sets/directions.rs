//! Deterministic, prefix-nested direction samples on the unit sphere.
//!
//! The first `2 * dim` directions are the signed coordinate axes. After that,
//! dimension 2 uses a golden-angle sequence, dimension 3 an R2 (plastic
//! number) sequence mapped to the sphere, and higher dimensions normalized
//! Gaussian draws from a seeded ChaCha stream. Asking for more directions
//! only appends to the list, so maxima over the sample are monotone in the
//! count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::space::{GramSpace, Vector};

/// Seed used by estimators that do not take one explicitly.
pub const DEFAULT_DIRECTION_SEED: u64 = 0x5eed_0f_d1e5;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const PLASTIC: f64 = 1.324_717_957_244_746;

/// `count` directions in `R^dim`, each normalized to unit length in `space`.
pub fn sample_directions(
    space: &GramSpace,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    let dim = space.dim();
    let mut raw: Vec<Vector> = Vec::with_capacity(count);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = sign;
            raw.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: (f64, f64) = (rng.random(), rng.random());
    let mut k = 0usize;
    while raw.len() < count && dim > 1 {
        k += 1;
        let kf = k as f64;
        let dir = match dim {
            2 => {
                let theta = std::f64::consts::TAU * (offset.0 + kf * GOLDEN).fract();
                DVector::from_column_slice(&[theta.cos(), theta.sin()])
            }
            3 => {
                let u = (offset.0 + kf / PLASTIC).fract();
                let v = (offset.1 + kf / (PLASTIC * PLASTIC)).fract();
                let z = 1.0 - 2.0 * u;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = std::f64::consts::TAU * v;
                DVector::from_column_slice(&[r * phi.cos(), r * phi.sin(), z])
            }
            _ => DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)),
        };
        raw.push(dir);
    }
    raw.truncate(count);
    raw.into_iter()
        .map(|d| {
            let n = space.norm(&d)?;
            Ok(d / n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_and_unit() {
        let space = GramSpace::diagonal(DVector::from_column_slice(&[1.0, 4.0, 9.0])).unwrap();
        let short = sample_directions(&space, 10, 7).unwrap();
        let long = sample_directions(&space, 40, 7).unwrap();
        assert_eq!(&long[..10], &short[..]);
        for d in &long {
            assert!((space.norm(d).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimension_has_two_directions() {
        let space = GramSpace::euclidean(1);
        let dirs = sample_directions(&space, 64, 1).unwrap();
        assert_eq!(dirs.len(), 2);
    }

    #[test]
    fn high_dimension_is_seeded() {
        let space = GramSpace::euclidean(5);
        let a = sample_directions(&space, 30, 11).unwrap();
        let b = sample_directions(&space, 30, 11).unwrap();
        let c = sample_directions(&space, 30, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
