//! Density matrices, the generalized Bloch parametrization, fidelity and
//! Bures metrics, and named reference states.
//!
//! Conventions fixed here and relied on everywhere else:
//! `|0> = (1 0)^T`, `|1> = (0 1)^T`, `|H> := |0>`, `|V> := |1>`, and the
//! Bloch basis is the HS-orthonormal set of generalized Gell-Mann matrices
//! (standard ones scaled by `1/sqrt(2)`), so that `rho = I/d + b . Gamma`
//! and `b_i = tr[Gamma_i rho]` hold simultaneously.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::linalg::{
    eigen_hermitian, sqrt_psd, ComplexMatrix, HermitianOperator, LinalgError, C64,
};

/// Trace and PSD slack accepted when validating a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("state vector norm {norm} is not 1 within 1e-12")]
    NotNormalized { norm: f64 },
    #[error("trace {trace} is not 1 within {tol:.0e}")]
    BadTrace { trace: f64, tol: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("Bloch vector length {len} is not d^2 - 1 for any integer d")]
    BadBlochLength { len: usize },
    #[error("mixing parameter {0} is outside [0, 1]")]
    BadMixingParameter(f64),
    #[error("rank {rank} is outside 1..={dim}")]
    BadRank { rank: usize, dim: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Unit vector in the fixed computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, StateError> {
        let norm = fmath::sqrt(amplitudes.iter().map(|z| z.norm_sqr()).sum());
        if fmath::abs(norm - 1.0) > 1e-12 {
            return Err(StateError::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Basis vector `|k>` of a d-dimensional space.
    pub fn computational(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[k] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn projector(&self) -> HermitianOperator {
        HermitianOperator::projector(&self.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            op: self.projector(),
        }
    }

    /// `<phi|A|phi>`.
    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        op.expectation(&self.amplitudes)
    }
}

/// The four maximally entangled two-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellState {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

/// Standard Bell vector in the fixed basis `|0> = (1 0)^T`, `|1> = (0 1)^T`.
pub fn bell_state(label: BellState) -> PureState {
    let s = FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let p = C64::new(s, 0.0);
    let m = C64::new(-s, 0.0);
    let amplitudes = match label {
        BellState::PsiMinus => vec![z, p, m, z],
        BellState::PsiPlus => vec![z, p, p, z],
        BellState::PhiMinus => vec![p, z, z, m],
        BellState::PhiPlus => vec![p, z, z, p],
    };
    PureState { amplitudes }
}

/// Trace-1 PSD operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self, StateError> {
        let trace = op.trace();
        if fmath::abs(trace - 1.0) > DENSITY_TOL {
            return Err(StateError::BadTrace {
                trace,
                tol: DENSITY_TOL,
            });
        }
        let min = op.min_eigenvalue();
        if min < -DENSITY_TOL {
            return Err(StateError::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(Self { op })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scaled(1.0 / dim as f64),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::hs_inner(&self.op, &self.op).expect("same dims")
    }
}

/// Real coefficient vector of `rho - I/d` over the Gell-Mann basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    coords: Vec<f64>,
}

impl BlochVector {
    /// Length must be `d^2 - 1` for some integer `d >= 2`.
    pub fn new(coords: Vec<f64>) -> Result<Self, StateError> {
        dim_for_bloch_len(coords.len())?;
        Ok(Self { coords })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim * dim - 1],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Hilbert-space dimension this vector parametrizes.
    pub fn state_dim(&self) -> usize {
        dim_for_bloch_len(self.coords.len()).expect("validated at construction")
    }

    pub fn norm(&self) -> f64 {
        fmath::sqrt(self.coords.iter().map(|x| x * x).sum())
    }
}

fn dim_for_bloch_len(len: usize) -> Result<usize, StateError> {
    let mut d = 2;
    while d * d - 1 < len {
        d += 1;
    }
    if d * d - 1 == len {
        Ok(d)
    } else {
        Err(StateError::BadBlochLength { len })
    }
}

/// HS-orthonormal traceless Hermitian basis: symmetric pairs, antisymmetric
/// pairs, then diagonal elements, each scaled to unit HS norm.
#[derive(Clone, Debug)]
pub struct GellMannBasis {
    dim: usize,
    gammas: Vec<HermitianOperator>,
}

impl GellMannBasis {
    pub fn new(dim: usize) -> Self {
        let mut gammas = Vec::with_capacity(dim * dim - 1);
        let z = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut m = ComplexMatrix::zeros(dim);
                m.set(i, j, C64::new(FRAC_1_SQRT_2, 0.0));
                m.set(j, i, C64::new(FRAC_1_SQRT_2, 0.0));
                gammas.push(HermitianOperator::symmetrized(m));
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut m = ComplexMatrix::zeros(dim);
                m.set(i, j, C64::new(0.0, -FRAC_1_SQRT_2));
                m.set(j, i, C64::new(0.0, FRAC_1_SQRT_2));
                gammas.push(HermitianOperator::symmetrized(m));
            }
        }
        for l in 1..dim {
            let norm = 1.0 / fmath::sqrt((l * (l + 1)) as f64);
            let mut m = ComplexMatrix::zeros(dim);
            for k in 0..l {
                m.set(k, k, C64::new(norm, 0.0));
            }
            m.set(l, l, C64::new(-(l as f64) * norm, 0.0));
            gammas.push(HermitianOperator::symmetrized(m));
        }
        let _ = z;
        Self { dim, gammas }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.gammas
    }
}

/// `rho(b) = I/d + sum_i b_i Gamma_i`, validated PSD.
pub fn bloch_to_density(b: &BlochVector) -> Result<DensityMatrix, StateError> {
    let op = bloch_to_operator(b);
    let min = op.min_eigenvalue();
    if min < -DENSITY_TOL {
        return Err(StateError::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(DensityMatrix { op })
}

/// Unit-trace Hermitian operator of a Bloch vector, without the PSD check.
/// Used by the optimizer while iterates are still outside the state set.
pub fn bloch_to_operator(b: &BlochVector) -> HermitianOperator {
    let d = b.state_dim();
    let basis = GellMannBasis::new(d);
    let mut op = HermitianOperator::identity(d).scaled(1.0 / d as f64);
    for (coeff, gamma) in b.coords().iter().zip(basis.operators()) {
        op = op.add(&gamma.scaled(*coeff));
    }
    op
}

/// `b_i = tr[Gamma_i rho]`; inverse of [`bloch_to_density`].
pub fn density_to_bloch(rho: &DensityMatrix) -> BlochVector {
    operator_to_bloch(rho.op())
}

pub(crate) fn operator_to_bloch(op: &HermitianOperator) -> BlochVector {
    let basis = GellMannBasis::new(op.dim());
    let coords = basis
        .operators()
        .iter()
        .map(|g| crate::linalg::hs_inner_unchecked(g, op))
        .collect();
    BlochVector { coords }
}

/// Uhlmann fidelity `F(rho, sigma) = tr sqrt(sqrt(rho) sigma sqrt(rho))`,
/// clipped to [0, 1] against float overshoot.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, StateError> {
    if rho.dim() != sigma.dim() {
        return Err(StateError::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let root = sqrt_psd(rho.op())?;
    let inner = root.matrix().matmul(sigma.op().matrix()).matmul(root.matrix());
    let eig = eigen_hermitian(&HermitianOperator::symmetrized(inner));
    // Relative floor: square roots of eigenvalues at rounding level would
    // otherwise inject sqrt(eps)-sized noise at rank-deficient inputs.
    let floor = eig.values.last().copied().unwrap_or(0.0).max(0.0) * 1e-14;
    let f: f64 = eig
        .values
        .iter()
        .filter(|&&l| l > floor)
        .map(|&l| fmath::sqrt(l))
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Pure-reference fidelity `sqrt(<phi|rho|phi>)`.
pub fn fidelity_pure(rho: &DensityMatrix, phi: &PureState) -> f64 {
    let overlap = phi.expectation(rho.op()).max(0.0);
    fmath::sqrt(overlap).clamp(0.0, 1.0)
}

/// Bures distance `sqrt(2 - 2F)`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, StateError> {
    let f = fidelity(rho, sigma)?;
    Ok(fmath::sqrt((2.0 - 2.0 * f).max(0.0)))
}

/// `p |Psi-><Psi-| + (1 - p) I/4`.
pub fn werner_state(p: f64) -> Result<DensityMatrix, StateError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StateError::BadMixingParameter(p));
    }
    let singlet = bell_state(BellState::PsiMinus).projector();
    let op = singlet
        .scaled(p)
        .add(&HermitianOperator::identity(4).scaled((1.0 - p) / 4.0));
    Ok(DensityMatrix { op })
}

/// Deterministic random density matrix of the requested rank
/// (Ginibre construction, normalized).
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix, StateError> {
    if rank == 0 || rank > dim {
        return Err(StateError::BadRank { rank, dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // dim x rank complex Gaussian factor; rho = G G* / tr.
    let cols: Vec<Vec<C64>> = (0..rank)
        .map(|_| (0..dim).map(|_| C64::new(gauss(&mut rng), gauss(&mut rng))).collect())
        .collect();
    let mut m = ComplexMatrix::zeros(dim);
    for col in &cols {
        for r in 0..dim {
            for c in 0..dim {
                let v = m.get(r, c) + col[r] * col[c].conj();
                m.set(r, c, v);
            }
        }
    }
    let trace = m.trace().re;
    let op = HermitianOperator::symmetrized(m.scaled(1.0 / trace));
    Ok(DensityMatrix { op })
}

/// Deterministic Haar-like random pure state.
pub fn random_pure(dim: usize, seed: u64) -> PureState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<C64> = (0..dim)
        .map(|_| C64::new(gauss(&mut rng), gauss(&mut rng)))
        .collect();
    let norm = fmath::sqrt(raw.iter().map(|z| z.norm_sqr()).sum());
    PureState {
        amplitudes: raw.into_iter().map(|z| z / norm).collect(),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    fmath::sqrt(-2.0 * fmath::ln(u1)) * fmath::cos(2.0 * core::f64::consts::PI * u2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: f64 = FRAC_1_SQRT_2;

    #[test]
    fn bell_vectors_match_convention() {
        let psi_m = bell_state(BellState::PsiMinus);
        let a = psi_m.amplitudes();
        assert!((a[1].re - SQ).abs() < 1e-15 && (a[2].re + SQ).abs() < 1e-15);
        assert!(a[0].norm() == 0.0 && a[3].norm() == 0.0);

        let psi_p = bell_state(BellState::PsiPlus);
        assert!((psi_p.amplitudes()[2].re - SQ).abs() < 1e-15);

        let phi_p = bell_state(BellState::PhiPlus);
        assert!((phi_p.amplitudes()[0].re - SQ).abs() < 1e-15);
        assert!((phi_p.amplitudes()[3].re - SQ).abs() < 1e-15);
    }

    #[test]
    fn gell_mann_basis_is_orthonormal_and_traceless() {
        for dim in [2usize, 3, 4] {
            let basis = GellMannBasis::new(dim);
            assert_eq!(basis.operators().len(), dim * dim - 1);
            for (i, a) in basis.operators().iter().enumerate() {
                assert!(fmath::abs(a.trace()) < 1e-12);
                for (j, b) in basis.operators().iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    let got = crate::linalg::hs_inner(a, b).unwrap();
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bloch_zero_is_maximally_mixed() {
        let rho = bloch_to_density(&BlochVector::zeros(4)).unwrap();
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(rho.op().matrix().max_abs_diff(mixed.op().matrix()) < 1e-15);
    }

    #[test]
    fn bloch_round_trip_singlet() {
        let rho = bell_state(BellState::PsiMinus).to_density();
        let b = density_to_bloch(&rho);
        assert!((b.norm() - fmath::sqrt(3.0) / 2.0).abs() < 1e-12);
        let back = bloch_to_density(&b).unwrap();
        assert!(back.op().matrix().max_abs_diff(rho.op().matrix()) < 1e-12);
    }

    #[test]
    fn overlarge_diagonal_coordinate_is_rejected() {
        let mut coords = vec![0.0; 15];
        // First diagonal Gell-Mann element of the 4x4 basis sits at index 12.
        coords[12] = 0.9;
        let err = bloch_to_density(&BlochVector::new(coords).unwrap());
        assert!(matches!(err, Err(StateError::NotPositive { .. })));
    }

    #[test]
    fn fidelity_basic_values() {
        let psi_m = bell_state(BellState::PsiMinus).to_density();
        let psi_p = bell_state(BellState::PsiPlus).to_density();
        let mixed = DensityMatrix::maximally_mixed(4);

        assert!((fidelity(&psi_m, &psi_m).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&psi_m, &psi_p).unwrap() < 1e-9);
        assert!((fidelity(&mixed, &psi_m).unwrap() - 0.5).abs() < 1e-11);
    }

    #[test]
    fn fidelity_rejects_dim_mismatch() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(4);
        assert!(matches!(
            fidelity(&a, &b),
            Err(StateError::DimensionMismatch(2, 4))
        ));
    }

    #[test]
    fn fidelity_pure_matches_overlap_formula() {
        let w = werner_state(1.0 / 3.0).unwrap();
        let psi_m = bell_state(BellState::PsiMinus);
        // <Psi-|rho_W|Psi-> = (3p + 1)/4 = 1/2 at p = 1/3.
        assert!((fidelity_pure(&w, &psi_m) - fmath::sqrt(0.5)).abs() < 1e-12);
        assert!((fidelity_pure(&psi_m.to_density(), &psi_m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bures_values() {
        let psi_m = bell_state(BellState::PsiMinus).to_density();
        let psi_p = bell_state(BellState::PsiPlus).to_density();
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(bures_distance(&psi_m, &psi_m).unwrap() < 1e-7);
        assert!((bures_distance(&psi_m, &psi_p).unwrap() - fmath::sqrt(2.0)).abs() < 1e-9);
        assert!((bures_distance(&mixed, &psi_m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn werner_endpoints_and_half() {
        let w0 = werner_state(0.0).unwrap();
        assert!(w0
            .op()
            .matrix()
            .max_abs_diff(DensityMatrix::maximally_mixed(4).op().matrix())
            < 1e-15);
        let w1 = werner_state(1.0).unwrap();
        let singlet = bell_state(BellState::PsiMinus).to_density();
        assert!(w1.op().matrix().max_abs_diff(singlet.op().matrix()) < 1e-15);

        let w = werner_state(0.5).unwrap();
        let f = fidelity_pure(&w, &bell_state(BellState::PsiMinus));
        assert!((f - fmath::sqrt(5.0 / 8.0)).abs() < 1e-12);

        assert!(werner_state(1.5).is_err());
    }

    #[test]
    fn random_density_ranks_and_determinism() {
        let r1 = random_density(4, 1, 7).unwrap();
        assert!((r1.purity() - 1.0).abs() < 1e-10);

        let r4 = random_density(4, 4, 7).unwrap();
        let eig = eigen_hermitian(r4.op());
        assert!(eig.values[0] > 0.0);

        let again = random_density(4, 1, 7).unwrap();
        assert!(r1.op().matrix().max_abs_diff(again.op().matrix()) == 0.0);

        assert!(random_density(4, 0, 1).is_err());
        assert!(random_density(4, 5, 1).is_err());
    }

    #[test]
    fn purity_links_to_bloch_norm() {
        for seed in 0..20 {
            let rho = random_density(4, 1 + (seed as usize % 4), seed).unwrap();
            let b = density_to_bloch(&rho);
            let lhs = rho.purity();
            let rhs = 0.25 + b.norm() * b.norm();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
