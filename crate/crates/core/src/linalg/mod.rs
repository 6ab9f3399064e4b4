//! Dense complex matrix algebra and the real-vectorization machinery used
//! for span ranks and kernel (perturbation-space) computations.
//!
//! Everything targets small dimensions (d <= 8). Storage is a dense
//! row-major `Vec` and the factorizations are cyclic Jacobi methods, which
//! at these sizes are simpler and more accurate than blocked routines.

mod eigen;
mod svd;
mod vectorize;

pub use eigen::{eigen_hermitian, Eigendecomposition};
pub(crate) use svd::RealSvd;
pub use vectorize::RealVectorization;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::fmath;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Absolute entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalues above this (negative) threshold are treated as zero when
/// taking operator square roots of nominally PSD matrices.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

/// Default relative singular-value threshold for numerical ranks.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian (max |A - A*| entry = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue = {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("operation requires a nonempty operator list")]
    EmptyList,
    #[error("entry count {entries} does not match dimension {dim}")]
    BadShape { entries: usize, dim: usize },
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.set(k, k, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self { dim, entries }
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be `dim * dim`.
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self, LinalgError> {
        if entries.len() != dim * dim {
            return Err(LinalgError::BadShape {
                entries: entries.len(),
                dim,
            });
        }
        Ok(Self { dim, entries })
    }

    /// Projector `|v><v|` onto a (not necessarily normalized) vector.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    /// Rank-1 operator `|u><v|`.
    pub fn outer_pair(u: &[C64], v: &[C64]) -> Self {
        debug_assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |r, c| u[r] * v[c].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.dim + c] = v;
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scaled_c(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        debug_assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        fmath::sqrt(self.entries.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = self.get(r, c) - self.get(c, r).conj();
                if fmath::hypot(d.re, d.im) > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.matmul(&self.adjoint())
            .max_abs_diff(&Self::identity(self.dim))
            <= tol
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self.get(r, c);
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scaled(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product; dimension of the result is `dim(a) * dim(b)`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim(), b.dim());
    ComplexMatrix::from_fn(na * nb, |r, c| {
        a.get(r / nb, c / nb) * b.get(r % nb, c % nb)
    })
}

/// Validated Hermitian matrix. Construction is the only Hermiticity check
/// in the crate; downstream code relies on the invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Accepts a matrix equal to its conjugate transpose within
    /// [`HERMITICITY_TOL`], entrywise.
    pub fn new(matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        let dev = matrix.max_abs_diff(&matrix.adjoint());
        if dev > HERMITICITY_TOL {
            return Err(LinalgError::NotHermitian { deviation: dev });
        }
        Ok(Self::symmetrized(matrix))
    }

    /// Replaces the matrix by `(A + A*)/2`, discarding float-level
    /// asymmetry from upstream products.
    pub(crate) fn symmetrized(matrix: ComplexMatrix) -> Self {
        let adj = matrix.adjoint();
        let sym = (&matrix + &adj).scaled(0.5);
        Self { matrix: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = ComplexMatrix::zeros(values.len());
        for (k, &v) in values.iter().enumerate() {
            m.set(k, k, C64::new(v, 0.0));
        }
        Self { matrix: m }
    }

    /// Projector `|v><v|`.
    pub fn projector(v: &[C64]) -> Self {
        Self::symmetrized(ComplexMatrix::outer(v))
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.matrix.get(r, c)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scaled(s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix - &other.matrix,
        }
    }

    /// `<v|A|v>`, real by Hermiticity.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let av = self.matrix.apply(v);
        v.iter()
            .zip(&av)
            .map(|(x, y)| (x.conj() * y).re)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigen_hermitian(self).values[0]
    }
}

/// Hilbert-Schmidt inner product `tr[a b]`; real for Hermitian arguments.
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(hs_inner_unchecked(a, b))
}

pub(crate) fn hs_inner_unchecked(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    // tr[AB] = sum_{r,c} A_rc B_cr = sum |..| using B_cr = conj(B_rc).
    for r in 0..n {
        for c in 0..n {
            acc += (a.get(r, c) * b.get(r, c).conj()).re;
        }
    }
    acc
}

/// Unique PSD square root. Eigenvalues below `-PSD_CLAMP_TOL` fail with
/// `NotPositive`; eigenvalues within `PSD_CLAMP_TOL` of zero are treated
/// as exact zeros — the square root would otherwise amplify rank-deficient
/// float noise from 1e-16 to 1e-8.
pub fn sqrt_psd(a: &HermitianOperator) -> Result<HermitianOperator, LinalgError> {
    let eig = eigen_hermitian(a);
    if eig.values[0] < -PSD_CLAMP_TOL {
        return Err(LinalgError::NotPositive {
            min_eigenvalue: eig.values[0],
        });
    }
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l <= PSD_CLAMP_TOL { 0.0 } else { fmath::sqrt(l) })
        .collect();
    Ok(eig.reassemble(&roots))
}

/// Dimension of the real linear span of Hermitian operators: the numerical
/// rank of their vectorized stack. Singular values below
/// `tol * (largest singular value)` count as zero.
pub fn span_dimension(ops: &[HermitianOperator], tol: f64) -> Result<usize, LinalgError> {
    let stack = vectorized_stack(ops)?;
    Ok(RealSvd::decompose(&stack).rank(tol))
}

/// Orthonormal (Hilbert-Schmidt) basis of the space of perturbations of a
/// POVM-like operator list: traceless Hermitian `D` with `tr[D E_j] = 0`
/// for every listed `E_j`.
pub fn perturbation_kernel(ops: &[HermitianOperator]) -> Result<Vec<HermitianOperator>, LinalgError> {
    let dim = check_equal_dims(ops)?;
    let mut stack = vectorized_stack(ops)?;
    stack.push(RealVectorization::from_operator(&HermitianOperator::identity(dim)).into_coords());
    let svd = RealSvd::decompose(&stack);
    let basis = svd
        .null_space(DEFAULT_RANK_TOL)
        .into_iter()
        .map(|coords| RealVectorization::new(dim, coords).to_operator())
        .collect();
    Ok(basis)
}

fn check_equal_dims(ops: &[HermitianOperator]) -> Result<usize, LinalgError> {
    let first = ops.first().ok_or(LinalgError::EmptyList)?;
    for op in ops {
        if op.dim() != first.dim() {
            return Err(LinalgError::DimensionMismatch(first.dim(), op.dim()));
        }
    }
    Ok(first.dim())
}

fn vectorized_stack(ops: &[HermitianOperator]) -> Result<Vec<Vec<f64>>, LinalgError> {
    check_equal_dims(ops)?;
    Ok(ops
        .iter()
        .map(|op| RealVectorization::from_operator(op).into_coords())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::from_fn(2, |r, c| {
            if r != c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        }))
        .unwrap()
    }

    fn sigma_z() -> HermitianOperator {
        HermitianOperator::diagonal(&[1.0, -1.0])
    }

    #[test]
    fn tensor_identity() {
        let i2 = ComplexMatrix::identity(2);
        let t = tensor_product(&i2, &i2);
        assert_eq!(t, ComplexMatrix::identity(4));
    }

    #[test]
    fn tensor_basis_projectors() {
        // |0><0| (x) |1><1| places a single 1 at index (1,1) of the 4x4.
        let p0 = ComplexMatrix::outer(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let p1 = ComplexMatrix::outer(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let t = tensor_product(&p0, &p1);
        let mut expect = ComplexMatrix::zeros(4);
        expect.set(1, 1, c(1.0, 0.0));
        assert!(t.max_abs_diff(&expect) == 0.0);
    }

    #[test]
    fn tensor_sigma_x_pair_is_antidiagonal() {
        let sx = sigma_x();
        let t = tensor_product(sx.matrix(), sx.matrix());
        let expect = ComplexMatrix::from_fn(4, |r, c_| {
            if r + c_ == 3 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        assert!(t.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn tensor_mixed_product_rule() {
        // (a (x) b)(c (x) d) = (ac) (x) (bd)
        let a = ComplexMatrix::from_fn(2, |r, c_| c((r + 2 * c_) as f64, 0.3 * r as f64));
        let b = ComplexMatrix::from_fn(2, |r, c_| c(0.5 - r as f64, c_ as f64));
        let lhs = tensor_product(&a, &b).matmul(&tensor_product(&b, &a));
        let rhs = tensor_product(&a.matmul(&b), &b.matmul(&a));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn hs_inner_identity() {
        let i4 = HermitianOperator::identity(4);
        assert_eq!(hs_inner(&i4, &i4).unwrap(), 4.0);
    }

    #[test]
    fn hs_inner_orthogonal_paulis() {
        let i2 = HermitianOperator::identity(2);
        let a = HermitianOperator::new(tensor_product(sigma_z().matrix(), i2.matrix())).unwrap();
        let b = HermitianOperator::new(tensor_product(i2.matrix(), sigma_z().matrix())).unwrap();
        assert!(fmath::abs(hs_inner(&a, &b).unwrap()) < 1e-15);
    }

    #[test]
    fn hs_inner_rejects_dim_mismatch() {
        let a = HermitianOperator::identity(2);
        let b = HermitianOperator::identity(4);
        assert!(matches!(
            hs_inner(&a, &b),
            Err(LinalgError::DimensionMismatch(2, 4))
        ));
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let mut m = ComplexMatrix::identity(2);
        m.set(0, 1, c(0.5, 0.0));
        assert!(matches!(
            HermitianOperator::new(m),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn sqrt_psd_identity_and_diagonal() {
        let i4 = HermitianOperator::identity(4);
        assert!(sqrt_psd(&i4).unwrap().matrix().max_abs_diff(i4.matrix()) < 1e-14);

        let d = HermitianOperator::diagonal(&[4.0, 1.0, 0.0, 0.0]);
        let r = sqrt_psd(&d).unwrap();
        let expect = HermitianOperator::diagonal(&[2.0, 1.0, 0.0, 0.0]);
        assert!(r.matrix().max_abs_diff(expect.matrix()) < 1e-12);
    }

    #[test]
    fn sqrt_psd_projector_is_self() {
        let s = fmath::sqrt(0.5);
        let psi = [c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        let p = HermitianOperator::projector(&psi);
        let r = sqrt_psd(&p).unwrap();
        assert!(r.matrix().max_abs_diff(p.matrix()) < 1e-12);
    }

    #[test]
    fn sqrt_psd_rejects_indefinite() {
        let d = HermitianOperator::diagonal(&[1.0, -0.1]);
        assert!(matches!(
            sqrt_psd(&d),
            Err(LinalgError::NotPositive { .. })
        ));
    }

    #[test]
    fn sqrt_psd_squares_back_on_random_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = ComplexMatrix::from_fn(4, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let a = HermitianOperator::symmetrized(g.matmul(&g.adjoint()));
            let r = sqrt_psd(&a).unwrap();
            let back = r.matrix().matmul(r.matrix());
            let diff = (&back - a.matrix()).frobenius_norm();
            assert!(diff < 1e-9, "residual {diff}");
        }
    }

    #[test]
    fn span_dimension_identity_alone() {
        let ops = [HermitianOperator::identity(4)];
        assert_eq!(span_dimension(&ops, DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn span_dimension_empty_list_errors() {
        assert!(matches!(
            span_dimension(&[], DEFAULT_RANK_TOL),
            Err(LinalgError::EmptyList)
        ));
    }

    #[test]
    fn span_dimension_scale_invariant() {
        let ops = [
            sigma_z(),
            HermitianOperator::identity(2),
            sigma_z().scaled(3.5),
        ];
        let scaled: Vec<_> = ops.iter().map(|o| o.scaled(7.25)).collect();
        assert_eq!(
            span_dimension(&ops, DEFAULT_RANK_TOL).unwrap(),
            span_dimension(&scaled, DEFAULT_RANK_TOL).unwrap()
        );
        assert_eq!(span_dimension(&ops, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn kernel_of_identity_is_traceless_space() {
        let ops = [HermitianOperator::identity(4)];
        let kernel = perturbation_kernel(&ops).unwrap();
        assert_eq!(kernel.len(), 15);
        for d in &kernel {
            assert!(fmath::abs(d.trace()) < 1e-12);
        }
    }

    #[test]
    fn kernel_of_full_basis_is_empty() {
        // A full orthonormal Hermitian basis of 4x4 leaves no perturbations.
        let i4 = HermitianOperator::identity(4).scaled(0.5);
        let mut ops = alloc::vec![i4];
        let gammas = crate::states::GellMannBasis::new(4);
        ops.extend(gammas.operators().iter().cloned());
        let kernel = perturbation_kernel(&ops).unwrap();
        assert!(kernel.is_empty());
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_orthogonal_to_ops() {
        let ops = [
            HermitianOperator::diagonal(&[1.0, 0.0, 0.0, 0.0]),
            HermitianOperator::diagonal(&[0.0, 1.0, 0.0, 0.0]),
            HermitianOperator::diagonal(&[0.0, 0.0, 1.0, 1.0]),
        ];
        let kernel = perturbation_kernel(&ops).unwrap();
        // span(ops + I) has dimension 3, so the kernel has 16 - 3 = 13.
        assert_eq!(kernel.len(), 13);
        for (i, a) in kernel.iter().enumerate() {
            for (j, b) in kernel.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(fmath::abs(hs_inner(a, b).unwrap() - want) < 1e-10);
            }
            for op in &ops {
                assert!(fmath::abs(hs_inner(a, op).unwrap()) < 1e-10);
            }
            assert!(fmath::abs(a.trace()) < 1e-10);
        }
    }

    #[test]
    fn span_plus_kernel_count_is_full_dimension() {
        // Holds whenever the identity lies in the span, as for any POVM.
        let ops = [
            HermitianOperator::diagonal(&[0.5, 0.5, 0.0, 0.0]),
            HermitianOperator::diagonal(&[0.5, 0.5, 1.0, 1.0]),
            sigma_z_zz(),
        ];
        let span = span_dimension(&ops, DEFAULT_RANK_TOL).unwrap();
        let kernel = perturbation_kernel(&ops).unwrap();
        assert_eq!(span + kernel.len(), 16);
    }

    fn sigma_z_zz() -> HermitianOperator {
        HermitianOperator::new(tensor_product(sigma_z().matrix(), sigma_z().matrix())).unwrap()
    }
}
