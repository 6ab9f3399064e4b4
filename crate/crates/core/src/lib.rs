//! Core numerics for deciding fidelity membership problems of two-qubit
//! polarization states from informationally incomplete measurements.
//!
//! The crate covers the full pipeline:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigendecomposition,
//!   span ranks and perturbation-space (kernel) bases,
//! - [`states`]: density matrices, the generalized Bloch parametrization,
//!   fidelity and Bures distance, Bell and Werner states,
//! - [`povm`]: the wave-plate optics model, rotated projective bases,
//!   POVM assembly and Born-rule probabilities, coincidence simulation,
//! - [`membership`]: fidelity partitions, solvability verification of a
//!   POVM against reference states, and the measurement-data decision
//!   engine,
//! - [`optimizer`]: certified global minimization of the l1 distance
//!   between measured and model outcome distributions over the
//!   Bloch-parametrized state set,
//! - [`oracle`]: a slow, algorithmically independent reference solver
//!   used to cross-check the primary optimizer.
//!
//! The crate is `no_std` (with `alloc`); all file formats and the CLI
//! live in the companion `memberscope` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod linalg;
pub mod membership;
pub mod optimizer;
pub mod oracle;
pub mod povm;
pub mod states;

pub use linalg::{ComplexMatrix, HermitianOperator, C64};
pub use membership::{MembershipDecision, Partition, ReferenceSpec, Segment, Side, Verdict};
pub use optimizer::{FitProblem, FitResult, FitStatus, LinearConstraint};
pub use povm::{BasisSetting, MeasurementRecord, Povm, ProjectiveBasis};
pub use states::{BellState, BlochVector, DensityMatrix, PureState};

/// Float helpers routed through `libm` so the crate builds without `std`.
pub(crate) mod fmath {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }

    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }

    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn hypot(x: f64, y: f64) -> f64 {
        libm::hypot(x, y)
    }
}
