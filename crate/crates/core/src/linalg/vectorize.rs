//! Real Hilbert-Schmidt coordinates of Hermitian operators.
//!
//! The basis is orthonormal: `d` diagonal units, then for each pair i < j
//! the symmetric element `(|i><j| + |j><i|)/sqrt(2)` and the antisymmetric
//! element `(-i|i><j| + i|j><i|)/sqrt(2)`. With this convention the HS
//! inner product of operators equals the Euclidean dot product of their
//! coordinate vectors.

use alloc::vec::Vec;

use super::{ComplexMatrix, HermitianOperator, C64};
use crate::fmath;

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Coordinates of a d x d Hermitian operator over the orthonormal real
/// basis above; length is always `d^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVectorization {
    dim: usize,
    coords: Vec<f64>,
}

impl RealVectorization {
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), dim * dim);
        Self { dim, coords }
    }

    pub fn from_operator(op: &HermitianOperator) -> Self {
        let d = op.dim();
        let mut coords = Vec::with_capacity(d * d);
        for k in 0..d {
            coords.push(op.get(k, k).re);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let z = op.get(i, j);
                coords.push(SQRT2 * z.re);
                coords.push(-SQRT2 * z.im);
            }
        }
        Self { dim: d, coords }
    }

    pub fn to_operator(&self) -> HermitianOperator {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d);
        for k in 0..d {
            m.set(k, k, C64::new(self.coords[k], 0.0));
        }
        let mut idx = d;
        for i in 0..d {
            for j in (i + 1)..d {
                let re = self.coords[idx] / SQRT2;
                let im = -self.coords[idx + 1] / SQRT2;
                idx += 2;
                m.set(i, j, C64::new(re, im));
                m.set(j, i, C64::new(re, -im));
            }
        }
        HermitianOperator::symmetrized(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        fmath::sqrt(self.coords.iter().map(|x| x * x).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_inner;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_random_hermitian() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let g = ComplexMatrix::from_fn(4, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let a = HermitianOperator::symmetrized(g);
            let back = RealVectorization::from_operator(&a).to_operator();
            assert!(back.matrix().max_abs_diff(a.matrix()) < 1e-12);
        }
    }

    #[test]
    fn hs_inner_equals_dot_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let a = HermitianOperator::symmetrized(ComplexMatrix::from_fn(4, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            }));
            let b = HermitianOperator::symmetrized(ComplexMatrix::from_fn(4, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            }));
            let dot = super::super::svd::dot(
                RealVectorization::from_operator(&a).coords(),
                RealVectorization::from_operator(&b).coords(),
            );
            assert!((dot - hs_inner(&a, &b).unwrap()).abs() < 1e-12);
        }
    }
}
