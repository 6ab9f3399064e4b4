//! Fidelity-membership partitions, solvability verification for a POVM
//! against reference states, and the measurement-data decision engine.
//!
//! A partition fixes pure reference states with fidelity thresholds; each
//! of the 2^n side combinations is one segment. A POVM solves the
//! membership problem conclusively when every perturbation in its kernel
//! is blind to the references (`sqrt(sigma) D sqrt(sigma) = 0`); the
//! decision engine refuses POVMs that fail the check, fits the measured
//! distribution once per segment, and reports the unique segment whose
//! fit residual vanishes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::linalg::{sqrt_psd, HermitianOperator, LinalgError};
use crate::optimizer::{
    constrained_l1_fit_bounded, ConstraintSense, FitOptions, FitProblem, FitStatus,
    LinearConstraint, OptimizerError,
};
use crate::povm::{settings, MeasurementRecord, OutcomeData, Povm, PovmError};
use crate::states::{bell_state, BellState, BlochVector, DensityMatrix, PureState, StateError};

/// Kernel elements with reference violations above this are disqualifying.
pub const SOLVABILITY_TOL: f64 = 1e-10;

/// A segment fit at or below this residual counts as an exact match.
pub const FIT_TOL_DEFAULT: f64 = 1e-7;

/// Required residual separation between the best and second-best segment.
pub const REJECT_TOL_DEFAULT: f64 = 1e-4;

/// Tolerance used by both Bell-state perturbation conditions.
pub const BELL_CONDITION_TOL: f64 = 1e-10;

const MAX_REFERENCES: usize = 8;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MembershipError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("threshold {0} is outside [0, 1]")]
    BadEpsilon(f64),
    #[error("partitions support 1..=8 references, got {0}")]
    BadPartitionSize(usize),
    #[error("operator dimension {got}, expected {expected}")]
    WrongDimension { got: usize, expected: usize },
    #[error(
        "POVM cannot conclusively solve the membership problem for reference {reference_index} \
         (worst kernel violation {violation:.3e})"
    )]
    UnsolvablePovm {
        reference_index: usize,
        violation: f64,
    },
    #[error("measurement record does not fit the POVM: {reason}")]
    MalformedRecord { reason: String },
}

/// One pure reference state with its fidelity threshold.
#[derive(Clone, Debug)]
pub struct ReferenceSpec {
    state: PureState,
    epsilon: f64,
}

impl ReferenceSpec {
    pub fn new(state: PureState, epsilon: f64) -> Result<Self, MembershipError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(MembershipError::BadEpsilon(epsilon));
        }
        Ok(Self { state, epsilon })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Which side of one reference's fidelity threshold a segment occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    AtLeast,
    Below,
}

/// One cell of the partition: a side flag per reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment {
    sides: Vec<Side>,
}

impl Segment {
    pub fn new(sides: Vec<Side>) -> Self {
        Self { sides }
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }
}

/// Pure reference states with thresholds, partitioning state space into
/// 2^n disjoint, exhaustive segments.
#[derive(Clone, Debug)]
pub struct Partition {
    refs: Vec<ReferenceSpec>,
}

impl Partition {
    pub fn new(refs: Vec<ReferenceSpec>) -> Result<Self, MembershipError> {
        if refs.is_empty() || refs.len() > MAX_REFERENCES {
            return Err(MembershipError::BadPartitionSize(refs.len()));
        }
        let dim = refs[0].state.dim();
        for r in &refs {
            if r.state.dim() != dim {
                return Err(MembershipError::WrongDimension {
                    got: r.state.dim(),
                    expected: dim,
                });
            }
        }
        Ok(Self { refs })
    }

    /// The experiment's partition: references Psi- and Psi+ with their
    /// fidelity thresholds.
    pub fn bell_pair(eps_minus: f64, eps_plus: f64) -> Result<Self, MembershipError> {
        Self::new(vec![
            ReferenceSpec::new(bell_state(BellState::PsiMinus), eps_minus)?,
            ReferenceSpec::new(bell_state(BellState::PsiPlus), eps_plus)?,
        ])
    }

    pub fn references(&self) -> &[ReferenceSpec] {
        &self.refs
    }

    pub fn segment_count(&self) -> usize {
        1usize << self.refs.len()
    }

    /// Lazily enumerates all 2^n segments; bit k of the index selects
    /// `AtLeast` for reference k.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.refs.len();
        (0..self.segment_count()).map(move |mask| {
            Segment::new(
                (0..n)
                    .map(|k| {
                        if (mask >> k) & 1 == 1 {
                            Side::AtLeast
                        } else {
                            Side::Below
                        }
                    })
                    .collect(),
            )
        })
    }

    /// Segment containing a state with the given per-reference fidelities.
    pub fn segment_for_fidelities(&self, fidelities: &[f64]) -> Segment {
        debug_assert_eq!(fidelities.len(), self.refs.len());
        Segment::new(
            self.refs
                .iter()
                .zip(fidelities)
                .map(|(r, &f)| {
                    if f >= r.epsilon {
                        Side::AtLeast
                    } else {
                        Side::Below
                    }
                })
                .collect(),
        )
    }
}

/// Result of checking the kernel condition for one reference state.
#[derive(Clone, Debug)]
pub struct SolvabilityReport {
    pub solvable: bool,
    /// Largest violation over HS-normalized kernel perturbations.
    pub worst_violation: f64,
    /// HS-normalized perturbation achieving (or approximating) the worst
    /// violation; present only when the check fails.
    pub witness: Option<HermitianOperator>,
    pub kernel_dimension: usize,
}

/// Checks `||sqrt(sigma) D sqrt(sigma)||_F <= tol` for every HS-normalized
/// kernel basis element `D` of the POVM. Vacuously true for an empty
/// kernel (informationally complete POVMs).
pub fn solvable_general(
    e: &Povm,
    sigma: &DensityMatrix,
    tol: f64,
) -> Result<SolvabilityReport, MembershipError> {
    if e.dim() != sigma.dim() {
        return Err(MembershipError::WrongDimension {
            got: sigma.dim(),
            expected: e.dim(),
        });
    }
    let kernel = e.perturbation_kernel();
    let root = sqrt_psd(sigma.op())?;
    let mut worst = 0.0_f64;
    let mut witness = None;
    for delta in &kernel {
        let sandwich = root.matrix().matmul(delta.matrix()).matmul(root.matrix());
        let norm = sandwich.frobenius_norm();
        if norm > worst {
            worst = norm;
            witness = Some(delta.clone());
        }
    }
    let solvable = worst <= tol;
    Ok(SolvabilityReport {
        solvable,
        worst_violation: worst,
        witness: if solvable { None } else { witness },
        kernel_dimension: kernel.len(),
    })
}

/// Pure-reference reduction of [`solvable_general`]: all kernel elements
/// must satisfy `|<phi|D|phi>| <= tol`. The reported worst violation is
/// the supremum over HS-normalized kernel combinations, and the witness
/// is the combination achieving it.
pub fn solvable_pure(
    e: &Povm,
    phi: &PureState,
    tol: f64,
) -> Result<SolvabilityReport, MembershipError> {
    if e.dim() != phi.dim() {
        return Err(MembershipError::WrongDimension {
            got: phi.dim(),
            expected: e.dim(),
        });
    }
    let kernel = e.perturbation_kernel();
    let values: Vec<f64> = kernel.iter().map(|d| phi.expectation(d)).collect();
    let solvable = values.iter().all(|v| fmath::abs(*v) <= tol);
    let norm = fmath::sqrt(values.iter().map(|v| v * v).sum());
    let witness = if solvable || norm == 0.0 {
        None
    } else {
        // The maximizing direction in the kernel is sum(v_i D_i)/|v|.
        let mut acc = kernel[0].scaled(values[0] / norm);
        for (d, v) in kernel.iter().zip(&values).skip(1) {
            acc = acc.add(&d.scaled(v / norm));
        }
        Some(acc)
    };
    Ok(SolvabilityReport {
        solvable,
        worst_violation: norm,
        witness,
        kernel_dimension: kernel.len(),
    })
}

/// Linear conditions a 4x4 perturbation must satisfy to keep the
/// Psi- and Psi+ membership problems solvable:
/// `D22 + D33 -+ 2 Re D23 = 0` (indices over the |01>, |10> block).
pub fn bell_delta_conditions(delta: &HermitianOperator) -> Result<(bool, bool), MembershipError> {
    if delta.dim() != 4 {
        return Err(MembershipError::WrongDimension {
            got: delta.dim(),
            expected: 4,
        });
    }
    let d22 = delta.get(1, 1).re;
    let d33 = delta.get(2, 2).re;
    let re_off = delta.get(1, 2).re;
    let minus_ok = fmath::abs(d22 + d33 - 2.0 * re_off) <= BELL_CONDITION_TOL;
    let plus_ok = fmath::abs(d22 + d33 + 2.0 * re_off) <= BELL_CONDITION_TOL;
    Ok((minus_ok, plus_ok))
}

/// The two-outcome POVM `{sigma, I - sigma}`: the minimal measurement
/// solving the fidelity membership problem of a pure reference.
pub fn minimal_pure_povm(phi: &PureState) -> Povm {
    let sigma = phi.projector();
    let complement = HermitianOperator::identity(phi.dim()).sub(&sigma);
    Povm::new(vec![sigma, complement]).expect("projector pair is a valid POVM")
}

/// Translates a segment into affine constraints on the fitted state: side
/// `AtLeast` of reference k becomes `tr[|phi_k><phi_k| rho] >= eps_k^2`,
/// side `Below` the closed relaxation `<= eps_k^2`.
pub fn segment_linear_constraints(p: &Partition, s: &Segment) -> Vec<LinearConstraint> {
    p.references()
        .iter()
        .zip(s.sides())
        .map(|(r, side)| LinearConstraint {
            operator: r.state.projector(),
            bound: r.epsilon * r.epsilon,
            direction: match side {
                Side::AtLeast => ConstraintSense::GreaterEq,
                Side::Below => ConstraintSense::LessEq,
            },
        })
        .collect()
}

/// Conclusiveness policy: residual threshold for an exact match and the
/// separation the runner-up must keep.
#[derive(Clone, Copy, Debug)]
pub struct DecisionPolicy {
    pub fit_tol: f64,
    pub reject_tol: f64,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            fit_tol: FIT_TOL_DEFAULT,
            reject_tol: REJECT_TOL_DEFAULT,
        }
    }
}

/// Fit outcome of a single segment.
#[derive(Clone, Debug)]
pub struct SegmentFit {
    pub segment: Segment,
    pub residual: f64,
    pub status: FitStatus,
    pub witness: BlochVector,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Conclusive(Segment),
    Inconclusive,
}

/// Per-segment residuals plus the verdict they imply. The verdict is
/// `Conclusive(s)` iff `s` is the unique segment fitting within the
/// policy's `fit_tol` and the runner-up is `reject_tol` worse.
#[derive(Clone, Debug)]
pub struct MembershipDecision {
    pub verdict: Verdict,
    pub segment_fits: Vec<SegmentFit>,
}

/// Decides which partition segment contains the state behind a
/// measurement record. The POVM must carry the source settings the record
/// was taken with, and must pass [`solvable_pure`] for every reference.
pub fn decide(
    record: &MeasurementRecord,
    e: &Povm,
    partition: &Partition,
    policy: &DecisionPolicy,
) -> Result<MembershipDecision, MembershipError> {
    check_solvability(e, partition)?;
    validate_record(record, e)?;
    let p = record.combined_distribution();
    decide_distribution_unchecked(&p, e, partition, policy)
}

/// [`decide`] for callers holding an outcome distribution directly
/// (ordering must match the POVM elements).
pub fn decide_distribution(
    p: &[f64],
    e: &Povm,
    partition: &Partition,
    policy: &DecisionPolicy,
) -> Result<MembershipDecision, MembershipError> {
    check_solvability(e, partition)?;
    decide_distribution_unchecked(p, e, partition, policy)
}

fn check_solvability(e: &Povm, partition: &Partition) -> Result<(), MembershipError> {
    for (reference_index, r) in partition.references().iter().enumerate() {
        let report = solvable_pure(e, &r.state, SOLVABILITY_TOL)?;
        if !report.solvable {
            return Err(MembershipError::UnsolvablePovm {
                reference_index,
                violation: report.worst_violation,
            });
        }
    }
    Ok(())
}

fn validate_record(record: &MeasurementRecord, e: &Povm) -> Result<(), MembershipError> {
    let source = e
        .source_settings()
        .ok_or_else(|| MembershipError::MalformedRecord {
            reason: String::from("POVM carries no source settings to match the record against"),
        })?;
    if record.len() != source.len() {
        return Err(MembershipError::MalformedRecord {
            reason: alloc::format!(
                "record has {} basis blocks, POVM was assembled from {}",
                record.len(),
                source.len()
            ),
        });
    }
    for (i, (meas, setting)) in record.bases().iter().zip(source).enumerate() {
        if !meas.setting.approx_eq(setting, 1e-9) {
            return Err(MembershipError::MalformedRecord {
                reason: alloc::format!("basis {i} angles do not match the POVM settings"),
            });
        }
        if let OutcomeData::Counts(c) = &meas.outcomes {
            if c.iter().sum::<u64>() == 0 {
                return Err(MembershipError::MalformedRecord {
                    reason: alloc::format!("basis {i} has zero total counts"),
                });
            }
        }
    }
    Ok(())
}

fn decide_distribution_unchecked(
    p: &[f64],
    e: &Povm,
    partition: &Partition,
    policy: &DecisionPolicy,
) -> Result<MembershipDecision, MembershipError> {
    let opts = FitOptions::default();
    // A certified residual above this can no longer influence the verdict.
    let reject_above = policy.fit_tol + policy.reject_tol;
    let mut fits = Vec::with_capacity(partition.segment_count());
    for segment in partition.segments() {
        let constraints = segment_linear_constraints(partition, &segment);
        let problem = FitProblem::new(e, p.to_vec(), constraints)?;
        let fit = constrained_l1_fit_bounded(&problem, &opts, Some(reject_above));
        fits.push(SegmentFit {
            segment,
            residual: fit.residual,
            status: fit.status,
            witness: fit.bloch,
            iterations: fit.iterations,
        });
    }

    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| fits[a].residual.partial_cmp(&fits[b].residual).unwrap());
    let best = order[0];
    let runner_up = fits[order[1]].residual;
    let verdict = if fits[best].residual <= policy.fit_tol
        && runner_up - fits[best].residual >= policy.reject_tol
    {
        Verdict::Conclusive(fits[best].segment.clone())
    } else {
        Verdict::Inconclusive
    };
    Ok(MembershipDecision {
        verdict,
        segment_fits: fits,
    })
}

/// One cell of a threshold sweep.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub decision: MembershipDecision,
}

/// Runs [`decide`] over the Cartesian product of Psi-/Psi+ threshold
/// grids; cells are independent. Row-major: eps_minus outer.
pub fn sweep(
    record: &MeasurementRecord,
    e: &Povm,
    eps_minus_grid: &[f64],
    eps_plus_grid: &[f64],
    policy: &DecisionPolicy,
) -> Result<Vec<SweepCell>, MembershipError> {
    let probe = Partition::bell_pair(0.5, 0.5)?;
    check_solvability(e, &probe)?;
    validate_record(record, e)?;
    let p = record.combined_distribution();

    let mut cells = Vec::with_capacity(eps_minus_grid.len() * eps_plus_grid.len());
    for &em in eps_minus_grid {
        for &ep in eps_plus_grid {
            let partition = Partition::bell_pair(em, ep)?;
            let decision = decide_distribution_unchecked(&p, e, &partition, policy)?;
            cells.push(SweepCell {
                eps_minus: em,
                eps_plus: ep,
                decision,
            });
        }
    }
    Ok(cells)
}

/// Bell-state fidelity estimates recovered from the three mutually
/// unbiased bases via their correlators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapEstimates {
    /// Estimated fidelity with Psi-.
    pub psi_minus: f64,
    /// Estimated fidelity with Psi+.
    pub psi_plus: f64,
}

/// Diagnostic estimator independent of the fitting machinery: from the
/// three-basis record, the correlators `c = p_HH - p_HV - p_VH + p_VV`
/// per basis give `<Psi-+|rho|Psi-+> = (1 - c_zz -+ (c_xx + c_yy))/4`.
pub fn overlap_estimates(record: &MeasurementRecord) -> Result<OverlapEstimates, MembershipError> {
    let expected = settings::three_mub();
    if record.len() != expected.len() {
        return Err(MembershipError::MalformedRecord {
            reason: alloc::format!(
                "overlap estimation needs the {} standard bases, record has {}",
                expected.len(),
                record.len()
            ),
        });
    }
    for (i, (meas, setting)) in record.bases().iter().zip(&expected).enumerate() {
        if !meas.setting.approx_eq(setting, 1e-9) {
            return Err(MembershipError::MalformedRecord {
                reason: alloc::format!("basis {i} is not the expected standard basis"),
            });
        }
    }
    let correlator = |i: usize| {
        let p = record.block_probabilities(i);
        p[0] - p[1] - p[2] + p[3]
    };
    let c_zz = correlator(0);
    let c_xx = correlator(1);
    let c_yy = correlator(2);
    let overlap_minus = ((1.0 - c_zz - (c_xx + c_yy)) / 4.0).clamp(0.0, 1.0);
    let overlap_plus = ((1.0 - c_zz + (c_xx + c_yy)) / 4.0).clamp(0.0, 1.0);
    Ok(OverlapEstimates {
        psi_minus: fmath::sqrt(overlap_minus),
        psi_plus: fmath::sqrt(overlap_plus),
    })
}

/// The eight named pure references the standard POVM solves for: the
/// computational basis states and the four Bell states.
pub fn standard_reference_states() -> Vec<(&'static str, PureState)> {
    vec![
        ("00", PureState::computational(4, 0)),
        ("01", PureState::computational(4, 1)),
        ("10", PureState::computational(4, 2)),
        ("11", PureState::computational(4, 3)),
        ("Phi-", bell_state(BellState::PhiMinus)),
        ("Phi+", bell_state(BellState::PhiPlus)),
        ("Psi-", bell_state(BellState::PsiMinus)),
        ("Psi+", bell_state(BellState::PsiPlus)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{span_dimension, ComplexMatrix, C64, DEFAULT_RANK_TOL};
    use crate::povm::{povm_from_settings, simulate_counts};
    use crate::states::werner_state;

    fn table1() -> Povm {
        povm_from_settings(&settings::three_mub()).unwrap()
    }

    fn table2() -> Povm {
        povm_from_settings(&settings::nine_basis()).unwrap()
    }

    #[test]
    fn table1_solvable_for_all_eight_references() {
        let povm = table1();
        for (name, phi) in standard_reference_states() {
            let report = solvable_pure(&povm, &phi, SOLVABILITY_TOL).unwrap();
            assert!(
                report.solvable,
                "{name}: violation {}",
                report.worst_violation
            );
            assert_eq!(report.kernel_dimension, 6);
        }
    }

    #[test]
    fn table2_not_solvable_for_bell_states() {
        let povm = table2();
        for label in [BellState::PsiMinus, BellState::PsiPlus] {
            let report = solvable_pure(&povm, &bell_state(label), SOLVABILITY_TOL).unwrap();
            assert!(!report.solvable);
            assert!(report.worst_violation >= 1e-3, "{}", report.worst_violation);
            let witness = report.witness.unwrap();
            // witness is HS-normalized and realizes the reported violation
            let norm = crate::linalg::hs_inner(&witness, &witness).unwrap();
            assert!((norm - 1.0).abs() < 1e-9);
            let v = bell_state(label).expectation(&witness);
            assert!((fmath::abs(v) - report.worst_violation).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_and_general_checks_agree() {
        for (povm, seed_base) in [(table1(), 0u64), (table2(), 100u64)] {
            for s in 0..5 {
                let phi = crate::states::random_pure(4, seed_base + s);
                let pure = solvable_pure(&povm, &phi, SOLVABILITY_TOL).unwrap();
                let general = solvable_general(&povm, &phi.to_density(), SOLVABILITY_TOL).unwrap();
                assert_eq!(pure.solvable, general.solvable);
            }
        }
    }

    #[test]
    fn informationally_complete_povm_is_vacuously_solvable() {
        // All nine products of the local z/x/y bases span the full
        // operator space.
        use crate::povm::BasisSetting;
        let pi_8 = core::f64::consts::FRAC_PI_8;
        let pi_4 = core::f64::consts::FRAC_PI_4;
        let local = [(0.0, 0.0), (pi_8, pi_4), (pi_8, 0.0)];
        let mut nine = Vec::new();
        for (t1, p1) in local {
            for (t2, p2) in local {
                nine.push(BasisSetting {
                    theta1: t1,
                    phi1: p1,
                    theta2: t2,
                    phi2: p2,
                });
            }
        }
        let povm = povm_from_settings(&nine).unwrap();
        assert!(povm.is_informationally_complete(DEFAULT_RANK_TOL));
        let report =
            solvable_pure(&povm, &bell_state(BellState::PsiMinus), SOLVABILITY_TOL).unwrap();
        assert!(report.solvable);
        assert_eq!(report.kernel_dimension, 0);
    }

    #[test]
    fn bell_conditions_on_constructed_cases() {
        // Zero 2,3 block: both hold.
        let mut m = ComplexMatrix::zeros(4);
        m.set(0, 3, C64::new(0.0, -1.0));
        m.set(3, 0, C64::new(0.0, 1.0));
        let d = HermitianOperator::new(m).unwrap();
        assert_eq!(bell_delta_conditions(&d).unwrap(), (true, true));

        // Purely imaginary off-diagonal in the 2,3 block: both hold.
        let mut m = ComplexMatrix::zeros(4);
        m.set(1, 2, C64::new(0.0, 1.0));
        m.set(2, 1, C64::new(0.0, -1.0));
        let d = HermitianOperator::new(m).unwrap();
        assert_eq!(bell_delta_conditions(&d).unwrap(), (true, true));

        // diag(0, 1, 0, -1): middle diagonal sums to 1, both fail.
        let d = HermitianOperator::diagonal(&[0.0, 1.0, 0.0, -1.0]);
        assert_eq!(bell_delta_conditions(&d).unwrap(), (false, false));

        // diag(0, 1, -1, 0): opposite middle entries, both hold.
        let d = HermitianOperator::diagonal(&[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(bell_delta_conditions(&d).unwrap(), (true, true));

        // Real off-diagonal only: both conditions fail.
        let mut m = ComplexMatrix::zeros(4);
        m.set(1, 2, C64::new(0.5, 0.0));
        m.set(2, 1, C64::new(0.5, 0.0));
        let d = HermitianOperator::new(m).unwrap();
        assert_eq!(bell_delta_conditions(&d).unwrap(), (false, false));

        assert!(bell_delta_conditions(&HermitianOperator::identity(2)).is_err());
    }

    #[test]
    fn bell_conditions_match_direct_expectations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let psi_m = bell_state(BellState::PsiMinus);
        let psi_p = bell_state(BellState::PsiPlus);
        for trial in 0..1000 {
            // Mix generic and structured perturbations so both branches
            // of each condition get exercised.
            let mut m = ComplexMatrix::from_fn(4, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            if trial % 3 == 0 {
                // zero the 2,3 diagonal entries and make D23 imaginary
                m.set(1, 1, C64::new(0.0, 0.0));
                m.set(2, 2, C64::new(0.0, 0.0));
                m.set(1, 2, C64::new(0.0, 1.0));
                m.set(2, 1, C64::new(0.0, -1.0));
            }
            let d = HermitianOperator::symmetrized(m);
            let (minus_ok, plus_ok) = bell_delta_conditions(&d).unwrap();
            // direct expectations: <Psi-+|D|Psi-+> = (D22 + D33 -+ 2 Re D23)/2
            let vm = psi_m.expectation(&d);
            let vp = psi_p.expectation(&d);
            assert_eq!(
                minus_ok,
                fmath::abs(vm) <= BELL_CONDITION_TOL / 2.0,
                "trial {trial}"
            );
            assert_eq!(
                plus_ok,
                fmath::abs(vp) <= BELL_CONDITION_TOL / 2.0,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn minimal_povm_properties() {
        let phi = bell_state(BellState::PsiMinus);
        let povm = minimal_pure_povm(&phi);
        assert_eq!(povm.len(), 2);
        assert!(
            povm.elements()[0]
                .matrix()
                .max_abs_diff(phi.projector().matrix())
                < 1e-15
        );
        assert_eq!(span_dimension(povm.elements(), DEFAULT_RANK_TOL).unwrap(), 2);
        let report = solvable_pure(&povm, &phi, SOLVABILITY_TOL).unwrap();
        assert!(report.solvable);
    }

    #[test]
    fn segment_constraint_translation() {
        let partition = Partition::bell_pair(0.5, 1.0).unwrap();
        let seg = Segment::new(vec![Side::AtLeast, Side::AtLeast]);
        let cons = segment_linear_constraints(&partition, &seg);
        assert_eq!(cons.len(), 2);
        assert!((cons[0].bound - 0.25).abs() < 1e-15);
        assert_eq!(cons[0].direction, ConstraintSense::GreaterEq);
        assert!((cons[1].bound - 1.0).abs() < 1e-15);

        let seg = Segment::new(vec![Side::Below, Side::AtLeast]);
        let cons = segment_linear_constraints(&partition, &seg);
        assert_eq!(cons[0].direction, ConstraintSense::LessEq);
    }

    #[test]
    fn decide_rejects_unsolvable_povm() {
        let povm = table2();
        let record = simulate_counts(&werner_state(0.9).unwrap(), &settings::nine_basis(), 0, 1);
        let partition = Partition::bell_pair(0.5, 0.5).unwrap();
        let err = decide(&record, &povm, &partition, &DecisionPolicy::default());
        assert!(matches!(err, Err(MembershipError::UnsolvablePovm { .. })));
    }

    #[test]
    fn decide_rejects_mismatched_record() {
        let povm = table1();
        let record = simulate_counts(&werner_state(0.9).unwrap(), &settings::nine_basis(), 0, 1);
        let partition = Partition::bell_pair(0.5, 0.5).unwrap();
        let err = decide(&record, &povm, &partition, &DecisionPolicy::default());
        assert!(matches!(err, Err(MembershipError::MalformedRecord { .. })));
    }

    #[test]
    fn decide_exact_werner_state() {
        let povm = table1();
        let rho = werner_state(0.9).unwrap();
        let record = simulate_counts(&rho, &settings::three_mub(), 0, 1);
        let partition = Partition::bell_pair(0.5, 0.5).unwrap();
        let decision = decide(&record, &povm, &partition, &DecisionPolicy::default()).unwrap();
        // F(Psi-) = sqrt(0.925) >= 0.5, F(Psi+) = sqrt(0.025) < 0.5
        let expect = Segment::new(vec![Side::AtLeast, Side::Below]);
        assert_eq!(decision.verdict, Verdict::Conclusive(expect));
    }

    #[test]
    fn boundary_state_is_inconclusive() {
        // The maximally mixed state sits exactly on both thresholds at
        // eps = 0.5: every segment fits, no verdict.
        let povm = table1();
        let rho = DensityMatrix::maximally_mixed(4);
        let record = simulate_counts(&rho, &settings::three_mub(), 0, 1);
        let partition = Partition::bell_pair(0.5, 0.5).unwrap();
        let decision = decide(&record, &povm, &partition, &DecisionPolicy::default()).unwrap();
        assert_eq!(decision.verdict, Verdict::Inconclusive);
        let passing = decision
            .segment_fits
            .iter()
            .filter(|f| f.residual <= FIT_TOL_DEFAULT)
            .count();
        assert_eq!(passing, 4);
    }

    #[test]
    fn zero_thresholds_give_the_all_at_least_segment() {
        let povm = table1();
        let rho = crate::states::random_density(4, 3, 64).unwrap();
        let record = simulate_counts(&rho, &settings::three_mub(), 0, 1);
        let partition = Partition::bell_pair(0.0, 0.0).unwrap();
        let decision = decide(&record, &povm, &partition, &DecisionPolicy::default()).unwrap();
        // Below-side segments demand overlap <= 0, infeasible unless the
        // state is orthogonal to the reference.
        let expect = Segment::new(vec![Side::AtLeast, Side::AtLeast]);
        assert_eq!(decision.verdict, Verdict::Conclusive(expect));
    }

    #[test]
    fn sweep_monotonicity_in_eps_minus() {
        let povm = table1();
        let rho = werner_state(0.8).unwrap(); // F(Psi-) = sqrt(0.85) ~ 0.922
        let record = simulate_counts(&rho, &settings::three_mub(), 0, 1);
        let grid = [0.5, 0.7, 0.9, 0.95];
        let cells = sweep(&record, &povm, &grid, &[0.3], &DecisionPolicy::default()).unwrap();
        let mut crossed = false;
        for cell in &cells {
            let Verdict::Conclusive(seg) = &cell.decision.verdict else {
                panic!("expected conclusive at these margins");
            };
            match seg.sides()[0] {
                Side::Below => crossed = true,
                Side::AtLeast => {
                    assert!(!crossed, "AtLeast after Below while raising eps-");
                }
            }
        }
        assert!(crossed, "threshold should cross before 0.95");
    }

    #[test]
    fn overlap_estimates_on_exact_singlet() {
        let psi_m = bell_state(BellState::PsiMinus).to_density();
        let record = simulate_counts(&psi_m, &settings::three_mub(), 0, 1);
        let est = overlap_estimates(&record).unwrap();
        assert!((est.psi_minus - 1.0).abs() < 1e-10);
        assert!(est.psi_plus < 1e-7);

        let bad = simulate_counts(&psi_m, &settings::nine_basis(), 0, 1);
        assert!(overlap_estimates(&bad).is_err());
    }
}
