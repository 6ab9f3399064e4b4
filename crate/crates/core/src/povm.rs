//! Wave-plate optics model, rotated projective bases, POVM assembly and
//! validation, Born-rule probabilities, and coincidence-count simulation.
//!
//! A detection station per photon holds a quarter-wave plate `W(phi, pi/2)`
//! followed by a half-wave plate `W(theta, pi)` and a polarizing beam
//! splitter; the measured two-qubit basis is the computational basis
//! rotated by `A_1(theta1, phi1) (x) A_2(theta2, phi2)` with
//! `A_k(theta, phi) = W(phi, pi/2)* W(theta, pi)*`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::linalg::{tensor_product, ComplexMatrix, HermitianOperator, LinalgError, C64};
use crate::states::DensityMatrix;

/// Entrywise tolerance for POVM validity (PSD elements, completeness).
pub const POVM_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PovmError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("element {index} is not PSD (min eigenvalue {min_eigenvalue:.3e})")]
    ElementNotPositive { index: usize, min_eigenvalue: f64 },
    #[error("elements do not sum to the identity (max deviation {deviation:.3e})")]
    NotComplete { deviation: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("basis list is empty")]
    EmptyBases,
    #[error("probabilities in basis block {index} sum to {sum}, not 1 within 1e-9")]
    UnnormalizedBlock { index: usize, sum: f64 },
}

/// A single wave plate: rotation angle and phase shift, radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePlate {
    pub rotation: f64,
    pub phase_shift: f64,
}

/// Jones matrix of a wave plate in the fixed H/V basis; unitary.
pub fn waveplate_matrix(w: &WavePlate) -> ComplexMatrix {
    let (mu, nu) = (w.rotation, w.phase_shift);
    let c = fmath::cos(mu);
    let s = fmath::sin(mu);
    let phase = C64::new(fmath::cos(nu), fmath::sin(nu));
    let off = (C64::new(1.0, 0.0) - phase) * (0.5 * fmath::sin(2.0 * mu));
    let mut m = ComplexMatrix::zeros(2);
    m.set(0, 0, C64::new(c * c, 0.0) + phase * (s * s));
    m.set(0, 1, off);
    m.set(1, 0, off);
    m.set(1, 1, C64::new(s * s, 0.0) + phase * (c * c));
    m
}

/// One-photon basis rotation `A(theta, phi) = W(phi, pi/2)* W(theta, pi)*`
/// (quarter-wave at `phi`, then half-wave at `theta`).
pub fn local_rotation(theta: f64, phi: f64) -> ComplexMatrix {
    let quarter = waveplate_matrix(&WavePlate {
        rotation: phi,
        phase_shift: core::f64::consts::FRAC_PI_2,
    });
    let half = waveplate_matrix(&WavePlate {
        rotation: theta,
        phase_shift: core::f64::consts::PI,
    });
    quarter.adjoint().matmul(&half.adjoint())
}

/// Half-wave and quarter-wave angles for both photons, radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisSetting {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
}

impl BasisSetting {
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        fmath::abs(self.theta1 - other.theta1) <= tol
            && fmath::abs(self.phi1 - other.phi1) <= tol
            && fmath::abs(self.theta2 - other.theta2) <= tol
            && fmath::abs(self.phi2 - other.phi2) <= tol
    }
}

/// Detector pairings, in the fixed outcome order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    HH = 0,
    HV = 1,
    VH = 2,
    VV = 3,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::HH, Outcome::HV, Outcome::VH, Outcome::VV];

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::HH => "HH",
            Outcome::HV => "HV",
            Outcome::VH => "VH",
            Outcome::VV => "VV",
        }
    }
}

/// The four rank-1 projectors of one rotated product basis, ordered
/// HH, HV, VH, VV.
#[derive(Clone, Debug)]
pub struct ProjectiveBasis {
    setting: BasisSetting,
    projectors: Vec<HermitianOperator>,
}

impl ProjectiveBasis {
    pub fn setting(&self) -> &BasisSetting {
        &self.setting
    }

    pub fn projectors(&self) -> &[HermitianOperator] {
        &self.projectors
    }
}

/// `P_ij = (A1 (x) A2) |ij><ij| (A1 (x) A2)*` for the four outcomes.
pub fn rotated_basis(s: &BasisSetting) -> ProjectiveBasis {
    let a1 = local_rotation(s.theta1, s.phi1);
    let a2 = local_rotation(s.theta2, s.phi2);
    let u = tensor_product(&a1, &a2);
    let projectors = (0..4)
        .map(|k| {
            let col: Vec<C64> = (0..4).map(|r| u.get(r, k)).collect();
            HermitianOperator::projector(&col)
        })
        .collect();
    ProjectiveBasis {
        setting: *s,
        projectors,
    }
}

/// Ordered list of positive operators summing to the identity; basis
/// weights are folded into the elements.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
    source: Option<Vec<BasisSetting>>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self, PovmError> {
        if elements.is_empty() {
            return Err(PovmError::EmptyBases);
        }
        let dim = elements[0].dim();
        let mut sum = ComplexMatrix::zeros(dim);
        for (index, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(PovmError::DimensionMismatch(dim, e.dim()));
            }
            let min = e.min_eigenvalue();
            if min < -POVM_TOL {
                return Err(PovmError::ElementNotPositive {
                    index,
                    min_eigenvalue: min,
                });
            }
            sum = &sum + e.matrix();
        }
        let deviation = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if deviation > POVM_TOL {
            return Err(PovmError::NotComplete { deviation });
        }
        Ok(Self {
            elements,
            source: None,
        })
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Wave-plate settings this POVM was assembled from, if any.
    pub fn source_settings(&self) -> Option<&[BasisSetting]> {
        self.source.as_deref()
    }

    pub fn span_dimension(&self, tol: f64) -> usize {
        crate::linalg::span_dimension(&self.elements, tol).expect("POVM is nonempty")
    }

    pub fn perturbation_kernel(&self) -> Vec<HermitianOperator> {
        crate::linalg::perturbation_kernel(&self.elements).expect("POVM is nonempty")
    }

    /// Informational completeness: the elements span all of operator space.
    pub fn is_informationally_complete(&self, tol: f64) -> bool {
        self.span_dimension(tol) == self.dim() * self.dim()
    }
}

/// Uniform mixture of projective bases: m bases give 4m elements, each
/// projector scaled by 1/m; element `j + 4(k-1)` is outcome j of basis k.
pub fn assemble_povm(bases: &[ProjectiveBasis]) -> Result<Povm, PovmError> {
    if bases.is_empty() {
        return Err(PovmError::EmptyBases);
    }
    let weight = 1.0 / bases.len() as f64;
    let mut elements = Vec::with_capacity(4 * bases.len());
    let mut source = Vec::with_capacity(bases.len());
    for basis in bases {
        source.push(*basis.setting());
        for p in basis.projectors() {
            elements.push(p.scaled(weight));
        }
    }
    let mut povm = Povm::new(elements)?;
    povm.source = Some(source);
    Ok(povm)
}

/// Assembles the POVM directly from wave-plate settings.
pub fn povm_from_settings(settings: &[BasisSetting]) -> Result<Povm, PovmError> {
    let bases: Vec<ProjectiveBasis> = settings.iter().map(rotated_basis).collect();
    assemble_povm(&bases)
}

/// Born-rule outcome distribution `q_i = tr[E_i rho]`, tiny negatives
/// clamped to zero.
pub fn born_probabilities(e: &Povm, rho: &DensityMatrix) -> Result<Vec<f64>, PovmError> {
    if e.dim() != rho.dim() {
        return Err(PovmError::DimensionMismatch(e.dim(), rho.dim()));
    }
    Ok(e.elements()
        .iter()
        .map(|el| crate::linalg::hs_inner_unchecked(el, rho.op()).max(0.0))
        .collect())
}

/// Per-basis coincidence data: raw counts or an exact distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum OutcomeData {
    Counts([u64; 4]),
    Probabilities([f64; 4]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisMeasurement {
    pub setting: BasisSetting,
    pub outcomes: OutcomeData,
}

/// Measured (or simulated) data for a list of basis settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    bases: Vec<BasisMeasurement>,
}

impl MeasurementRecord {
    /// Probability blocks must sum to 1 within 1e-9.
    pub fn new(bases: Vec<BasisMeasurement>) -> Result<Self, PovmError> {
        for (index, b) in bases.iter().enumerate() {
            if let OutcomeData::Probabilities(p) = &b.outcomes {
                let sum: f64 = p.iter().sum();
                if fmath::abs(sum - 1.0) > 1e-9 {
                    return Err(PovmError::UnnormalizedBlock { index, sum });
                }
            }
        }
        Ok(Self { bases })
    }

    pub fn bases(&self) -> &[BasisMeasurement] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// Relative frequencies of one basis block.
    pub fn block_probabilities(&self, index: usize) -> [f64; 4] {
        match &self.bases[index].outcomes {
            OutcomeData::Probabilities(p) => *p,
            OutcomeData::Counts(c) => {
                let total: u64 = c.iter().sum();
                if total == 0 {
                    [0.25; 4]
                } else {
                    let t = total as f64;
                    [
                        c[0] as f64 / t,
                        c[1] as f64 / t,
                        c[2] as f64 / t,
                        c[3] as f64 / t,
                    ]
                }
            }
        }
    }

    /// Concatenates the per-basis blocks with weight 1/m, matching the
    /// element ordering of [`assemble_povm`]; the result sums to 1.
    pub fn combined_distribution(&self) -> Vec<f64> {
        let m = self.bases.len() as f64;
        let mut out = Vec::with_capacity(4 * self.bases.len());
        for k in 0..self.bases.len() {
            for p in self.block_probabilities(k) {
                out.push(p / m);
            }
        }
        out
    }
}

/// Draws multinomial coincidence counts per basis from the Born
/// distribution; `shots_per_basis = 0` records exact probabilities.
/// Deterministic per seed.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[BasisSetting],
    shots_per_basis: u64,
    seed: u64,
) -> MeasurementRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = Vec::with_capacity(settings.len());
    for s in settings {
        let basis = rotated_basis(s);
        let mut p = [0.0; 4];
        for (k, proj) in basis.projectors().iter().enumerate() {
            p[k] = crate::linalg::hs_inner_unchecked(proj, rho.op()).max(0.0);
        }
        let outcomes = if shots_per_basis == 0 {
            OutcomeData::Probabilities(p)
        } else {
            let mut counts = [0u64; 4];
            for _ in 0..shots_per_basis {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut slot = 3;
                for (k, &pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        slot = k;
                        break;
                    }
                }
                counts[slot] += 1;
            }
            OutcomeData::Counts(counts)
        };
        bases.push(BasisMeasurement {
            setting: *s,
            outcomes,
        });
    }
    MeasurementRecord { bases }
}

/// Built-in wave-plate setting sets used by the fixtures and the CLI.
pub mod settings {
    use super::BasisSetting;
    use alloc::vec;
    use alloc::vec::Vec;
    use core::f64::consts::FRAC_PI_4;

    const PI_8: f64 = core::f64::consts::FRAC_PI_8;

    /// Three mutually unbiased product bases (local H/V, +/-, R/L);
    /// sufficient for the Bell-state fidelity membership problems.
    /// CLI name: `table1`.
    pub fn three_mub() -> Vec<BasisSetting> {
        vec![
            BasisSetting {
                theta1: 0.0,
                phi1: 0.0,
                theta2: 0.0,
                phi2: 0.0,
            },
            BasisSetting {
                theta1: PI_8,
                phi1: FRAC_PI_4,
                theta2: PI_8,
                phi2: FRAC_PI_4,
            },
            BasisSetting {
                theta1: PI_8,
                phi1: 0.0,
                theta2: PI_8,
                phi2: 0.0,
            },
        ]
    }

    /// Nine-basis set that spans more of operator space (13 of 16
    /// dimensions) than [`three_mub`] yet fails the Bell-state
    /// solvability condition: its kernel contains perturbations with
    /// nonzero Bell-state expectations. CLI name: `table2`.
    pub fn nine_basis() -> Vec<BasisSetting> {
        // (theta1, phi1, theta2, phi2) per basis.
        let rows: [[f64; 4]; 9] = [
            [0.0, 0.0, 0.0, 0.0],
            [FRAC_PI_4, PI_8, FRAC_PI_4, PI_8],
            [FRAC_PI_4, 0.0, FRAC_PI_4, 0.0],
            [PI_8, 0.0, FRAC_PI_4, 0.0],
            [PI_8, 0.0, 0.0, 0.0],
            [PI_8, FRAC_PI_4, 0.0, 0.0],
            [PI_8, FRAC_PI_4, FRAC_PI_4, 0.0],
            [PI_8, FRAC_PI_4, PI_8, 0.0],
            [PI_8, FRAC_PI_4, PI_8, FRAC_PI_4],
        ];
        rows.iter()
            .map(|r| BasisSetting {
                theta1: r[0],
                phi1: r[1],
                theta2: r[2],
                phi2: r[3],
            })
            .collect()
    }
}
