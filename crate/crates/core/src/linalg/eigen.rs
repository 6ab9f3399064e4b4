//! Cyclic Jacobi eigendecomposition for Hermitian matrices.
//!
//! Jacobi converges quadratically and keeps small eigenvalues to high
//! relative accuracy, which the PSD clamping tolerances downstream rely on.

use alloc::vec::Vec;

use super::{ComplexMatrix, HermitianOperator, C64};
use crate::fmath;

const MAX_SWEEPS: usize = 60;

/// `a = V diag(values) V*` with `values` ascending and `V` unitary
/// (columns are eigenvectors).
#[derive(Clone, Debug)]
pub struct Eigendecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigendecomposition {
    /// Rebuilds `V diag(new_values) V*`, e.g. after clamping or taking
    /// square roots of the spectrum.
    pub fn reassemble(&self, new_values: &[f64]) -> HermitianOperator {
        let n = self.values.len();
        debug_assert_eq!(new_values.len(), n);
        let m = ComplexMatrix::from_fn(n, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += self.vectors.get(r, k) * new_values[k] * self.vectors.get(c, k).conj();
            }
            acc
        });
        HermitianOperator::symmetrized(m)
    }

    /// Column `k` of `V`.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.values.len())
            .map(|r| self.vectors.get(r, k))
            .collect()
    }
}

/// Full eigendecomposition of a Hermitian operator; eigenvalues ascending.
pub fn eigen_hermitian(a: &HermitianOperator) -> Eigendecomposition {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut v = ComplexMatrix::identity(n);

    let scale = m.frobenius_norm();
    let stop = scale * 1e-15;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let h = fmath::hypot(apq.re, apq.im);
                if h <= stop {
                    continue;
                }
                rotated = true;
                // Phase factor making the (p,q) pivot real, then a real
                // Jacobi rotation zeroing it.
                let phase = apq / h; // e^{i beta}
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (app - aqq) / (2.0 * h);
                let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (fmath::abs(tau) + fmath::sqrt(1.0 + tau * tau));
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = t * c;

                // Unitary: U[p][p]=c, U[p][q]=-s, U[q][p]=s*conj(phase),
                // U[q][q]=c*conj(phase). Apply M <- U* M U, V <- V U.
                let e_minus = phase.conj();
                let e_plus = phase;

                // Column update: M <- M U
                for r in 0..n {
                    let mp = m.get(r, p);
                    let mq = m.get(r, q);
                    m.set(r, p, mp * c + mq * (e_minus * s));
                    m.set(r, q, mp * (-s) + mq * (e_minus * c));
                }
                // Row update: M <- U* M
                for cidx in 0..n {
                    let mp = m.get(p, cidx);
                    let mq = m.get(q, cidx);
                    m.set(p, cidx, mp * c + mq * (e_plus * s));
                    m.set(q, cidx, mp * (-s) + mq * (e_plus * c));
                }
                // Accumulate V <- V U
                for r in 0..n {
                    let vp = v.get(r, p);
                    let vq = v.get(r, q);
                    v.set(r, p, vp * c + vq * (e_minus * s));
                    v.set(r, q, vp * (-s) + vq * (e_minus * c));
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|k| m.get(k, k).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());

    let values: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, |r, c| v.get(r, order[c]));
    Eigendecomposition { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_inner;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_eigenvalues_sorted() {
        let a = HermitianOperator::diagonal(&[3.0, 1.0, 4.0, 2.0]);
        let eig = eigen_hermitian(&a);
        assert_eq!(eig.values, alloc::vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let m = ComplexMatrix::from_fn(2, |r, c_| {
            if r != c_ { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        let eig = eigen_hermitian(&HermitianOperator::new(m).unwrap());
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_projector_spectrum() {
        let s = 0.5f64.sqrt();
        let psi = [c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        let p = HermitianOperator::projector(&psi);
        let eig = eigen_hermitian(&p);
        for k in 0..3 {
            assert!(eig.values[k].abs() < 1e-14);
        }
        assert!((eig.values[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstruction_and_unitarity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 4, 6, 8] {
            for _ in 0..20 {
                let g = ComplexMatrix::from_fn(n, |_, _| {
                    c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                let a = HermitianOperator::symmetrized(g);
                let eig = eigen_hermitian(&a);

                // V unitary
                assert!(eig.vectors.is_unitary(1e-11));

                // A v_k = lambda_k v_k
                for k in 0..n {
                    let vk = eig.eigenvector(k);
                    let av = a.matrix().apply(&vk);
                    for r in 0..n {
                        let resid = av[r] - vk[r] * eig.values[k];
                        assert!(resid.norm() < 1e-10);
                    }
                }

                // trace invariants
                let tr: f64 = eig.values.iter().sum();
                assert!((tr - a.trace()).abs() < 1e-10);
                let tr2: f64 = eig.values.iter().map(|l| l * l).sum();
                assert!((tr2 - hs_inner(&a, &a).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reassemble_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let g = ComplexMatrix::from_fn(4, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let a = HermitianOperator::symmetrized(g);
        let eig = eigen_hermitian(&a);
        let back = eig.reassemble(&eig.values);
        assert!(back.matrix().max_abs_diff(a.matrix()) < 1e-11);
    }
}
