//! Constrained minimization of the l1 distance between measured and model
//! outcome distributions over Bloch-parametrized density matrices.
//!
//! The program is convex: `q_i = tr[E_i rho(b)]` is affine in the Bloch
//! vector, so the objective is piecewise linear, and the feasible set is
//! the PSD slice of the unit-trace operators intersected with half-spaces.
//! The solver exploits that structure in two stages:
//!
//! 1. a zero-residual fast path: when the target distribution is exactly
//!    reproducible, cyclic projections onto the data-matching affine set,
//!    the constraint half-spaces, and the PSD slice find a witness
//!    directly;
//! 2. an epigraph linear program refined with eigenvalue cuts otherwise.
//!    Each round solves an outer LP relaxation (a certified lower bound),
//!    repairs the LP point onto the true feasible set (an upper bound),
//!    and terminates when the two meet. Reported residuals are therefore
//!    global, not local.

mod simplex;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::linalg::{
    eigen_hermitian, Eigendecomposition, HermitianOperator, RealSvd, RealVectorization, C64,
    DEFAULT_RANK_TOL,
};
use crate::povm::Povm;
use crate::states::{bloch_to_density, BlochVector, GellMannBasis};
use simplex::{LpOutcome, Row, Sense};

/// Acceptable optimality gap for a `Converged` result.
pub const GAP_CONTRACT: f64 = 1e-9;

/// Feasibility slack certified by a `Converged` result.
pub const FEASIBILITY_CERT: f64 = 1e-9;

const MAX_LP_ROUNDS: usize = 120;
const REPAIR_CYCLES: usize = 4000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid target distribution: {0}")]
    BadTarget(String),
    #[error("constraint operator dimension {got} does not match the POVM dimension {expected}")]
    BadConstraint { got: usize, expected: usize },
}

/// Sum of absolute differences; zero iff the vectors are equal.
pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64, OptimizerError> {
    if p.len() != q.len() {
        return Err(OptimizerError::LengthMismatch(p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| fmath::abs(a - b)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintSense {
    GreaterEq,
    LessEq,
}

/// Affine constraint `tr[A rho] >= c` or `<= c` on the fitted state.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub operator: HermitianOperator,
    pub bound: f64,
    pub direction: ConstraintSense,
}

/// A target outcome distribution, the POVM producing it, and the side
/// constraints of one partition segment.
#[derive(Clone, Debug)]
pub struct FitProblem<'a> {
    target: Vec<f64>,
    povm: &'a Povm,
    constraints: Vec<LinearConstraint>,
    psd_required: bool,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        povm: &'a Povm,
        target: Vec<f64>,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self, OptimizerError> {
        if target.len() != povm.len() {
            return Err(OptimizerError::LengthMismatch(target.len(), povm.len()));
        }
        if target.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(OptimizerError::BadTarget(String::from(
                "entries must be finite and nonnegative",
            )));
        }
        let sum: f64 = target.iter().sum();
        if fmath::abs(sum - 1.0) > 1e-9 {
            return Err(OptimizerError::BadTarget(alloc::format!(
                "entries sum to {sum}, not 1 within 1e-9"
            )));
        }
        for c in &constraints {
            if c.operator.dim() != povm.dim() {
                return Err(OptimizerError::BadConstraint {
                    got: c.operator.dim(),
                    expected: povm.dim(),
                });
            }
        }
        Ok(Self {
            target,
            povm,
            constraints,
            psd_required: true,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn povm(&self) -> &Povm {
        self.povm
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn psd_required(&self) -> bool {
        self.psd_required
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub bloch: BlochVector,
    pub residual: f64,
    pub status: FitStatus,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Target on constraint violation and on the optimality gap.
    pub tol: f64,
    /// Cap on fast-path projection cycles.
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

/// Minimizes `sum_i |p_i - tr[E_i rho(b)]|` over PSD `rho(b)` subject to
/// the problem's linear constraints. See the module docs for the method;
/// the residual of a `Converged` result is within [`GAP_CONTRACT`] of the
/// global minimum.
pub fn constrained_l1_fit(problem: &FitProblem<'_>, opts: &FitOptions) -> FitResult {
    constrained_l1_fit_bounded(problem, opts, None)
}

/// [`constrained_l1_fit`] with an optional rejection threshold: once the
/// certified lower bound exceeds it the fit stops early, reporting the
/// best feasible iterate (status `IterationLimit`). The decision engine
/// uses this to discard segments without polishing their exact optima.
pub(crate) fn constrained_l1_fit_bounded(
    problem: &FitProblem<'_>,
    opts: &FitOptions,
    reject_above: Option<f64>,
) -> FitResult {
    let ctx = FitContext::new(problem);

    if let Some((b, cycles)) = zero_residual_attempt(&ctx, opts) {
        return finish(&ctx, b, FitStatus::Converged, cycles);
    }
    lp_phase(&ctx, opts, reject_above)
}

/// Precomputed affine data of one fit.
pub(crate) struct FitContext<'a> {
    pub problem: &'a FitProblem<'a>,
    pub dim: usize,
    pub n_bloch: usize,
    pub gammas: Vec<HermitianOperator>,
    /// q0_i = tr[E_i]/d.
    pub q0: Vec<f64>,
    /// m[i][k] = tr[E_i Gamma_k]; q(b) = q0 + M b.
    pub m_rows: Vec<Vec<f64>>,
    m_svd: RealSvd,
    e_svd: RealSvd,
    /// Constraint rows on b: (g, h, sense) meaning g.b >= h or <= h.
    pub lin_rows: Vec<(Vec<f64>, f64, ConstraintSense)>,
    /// Outer box bound: |b_k| <= sqrt((d-1)/d) for any state.
    pub radius: f64,
}

impl<'a> FitContext<'a> {
    pub fn new(problem: &'a FitProblem<'a>) -> Self {
        let povm = problem.povm();
        let dim = povm.dim();
        let n_bloch = dim * dim - 1;
        let gammas: Vec<HermitianOperator> = GellMannBasis::new(dim).operators().to_vec();

        let q0: Vec<f64> = povm
            .elements()
            .iter()
            .map(|e| e.trace() / dim as f64)
            .collect();
        let m_rows: Vec<Vec<f64>> = povm
            .elements()
            .iter()
            .map(|e| {
                gammas
                    .iter()
                    .map(|g| crate::linalg::hs_inner_unchecked(e, g))
                    .collect()
            })
            .collect();
        let m_svd = RealSvd::decompose(&m_rows);

        let e_stack: Vec<Vec<f64>> = povm
            .elements()
            .iter()
            .map(|e| RealVectorization::from_operator(e).into_coords())
            .collect();
        let e_svd = RealSvd::decompose(&e_stack);

        let lin_rows = problem
            .constraints()
            .iter()
            .map(|c| {
                let g: Vec<f64> = gammas
                    .iter()
                    .map(|gamma| crate::linalg::hs_inner_unchecked(&c.operator, gamma))
                    .collect();
                let h = c.bound - c.operator.trace() / dim as f64;
                (g, h, c.direction)
            })
            .collect();

        let radius = fmath::sqrt((dim as f64 - 1.0) / dim as f64);
        Self {
            problem,
            dim,
            n_bloch,
            gammas,
            q0,
            m_rows,
            m_svd,
            e_svd,
            lin_rows,
            radius,
        }
    }

    pub fn rho_op(&self, b: &[f64]) -> HermitianOperator {
        let mut op = HermitianOperator::identity(self.dim).scaled(1.0 / self.dim as f64);
        for (coeff, gamma) in b.iter().zip(&self.gammas) {
            if *coeff != 0.0 {
                op = op.add(&gamma.scaled(*coeff));
            }
        }
        op
    }

    pub fn q_of(&self, b: &[f64]) -> Vec<f64> {
        self.m_rows
            .iter()
            .zip(&self.q0)
            .map(|(row, q0)| q0 + dot(row, b))
            .collect()
    }

    pub fn objective(&self, b: &[f64]) -> f64 {
        self.q_of(b)
            .iter()
            .zip(self.problem.target())
            .map(|(q, p)| fmath::abs(p - q))
            .sum()
    }

    pub fn eigen(&self, b: &[f64]) -> Eigendecomposition {
        eigen_hermitian(&self.rho_op(b))
    }

    /// Projects onto the PSD slice (unit trace is kept by construction);
    /// returns the smallest eigenvalue seen before projecting.
    pub fn project_psd(&self, b: &mut [f64]) -> f64 {
        let eig = self.eigen(b);
        let min = eig.values[0];
        if min >= 0.0 {
            return min;
        }
        let clamped = project_simplex(&eig.values);
        let op = eig.reassemble(&clamped);
        for (bk, gamma) in b.iter_mut().zip(&self.gammas) {
            *bk = crate::linalg::hs_inner_unchecked(&op, gamma);
        }
        min
    }

    pub fn project_halfspaces(&self, b: &mut [f64]) {
        for (g, h, sense) in &self.lin_rows {
            let val = dot(g, b);
            let gap = match sense {
                ConstraintSense::GreaterEq => *h - val,
                ConstraintSense::LessEq => val - *h,
            };
            if gap > 0.0 {
                let gg = dot(g, g);
                if gg == 0.0 {
                    continue;
                }
                let step = gap / gg;
                let sgn = match sense {
                    ConstraintSense::GreaterEq => 1.0,
                    ConstraintSense::LessEq => -1.0,
                };
                for (bk, gk) in b.iter_mut().zip(g) {
                    *bk += sgn * step * gk;
                }
            }
        }
    }

    pub fn halfspace_violation(&self, b: &[f64]) -> f64 {
        self.lin_rows
            .iter()
            .map(|(g, h, sense)| {
                let val = dot(g, b);
                match sense {
                    ConstraintSense::GreaterEq => (*h - val).max(0.0),
                    ConstraintSense::LessEq => (val - *h).max(0.0),
                }
            })
            .fold(0.0, f64::max)
    }

    /// Cyclic projections onto the half-spaces and the PSD slice.
    pub fn repair(&self, b: &mut [f64], tol: f64, cap: usize) -> bool {
        for _ in 0..cap {
            self.project_halfspaces(b);
            let min = self.project_psd(b);
            if min >= -tol && self.halfspace_violation(b) <= tol {
                return true;
            }
        }
        let min = self.eigen(b).values[0];
        self.halfspace_violation(b) <= tol && min >= -tol
    }

    /// Dykstra projection onto the feasible set: unlike [`Self::repair`]
    /// this converges to the nearest feasible point, which the polishing
    /// descent relies on. Runs until the iterate stops moving, not merely
    /// until it is feasible.
    pub fn project_feasible(&self, b: &mut Vec<f64>, tol: f64, cap: usize) -> bool {
        let k = b.len();
        let n_sets = self.lin_rows.len() + 1;
        let mut corrections = vec![vec![0.0; k]; n_sets];
        for _ in 0..cap {
            let cycle_start = b.clone();
            for (set, correction) in corrections.iter_mut().enumerate() {
                for (bi, ci) in b.iter_mut().zip(correction.iter()) {
                    *bi += ci;
                }
                let before = b.clone();
                if set < self.lin_rows.len() {
                    let (g, h, sense) = &self.lin_rows[set];
                    project_single_halfspace(b, g, *h, *sense);
                } else {
                    self.project_psd(b);
                }
                for ((ci, yi), bi) in correction.iter_mut().zip(&before).zip(b.iter()) {
                    *ci = yi - bi;
                }
            }
            let moved = b
                .iter()
                .zip(&cycle_start)
                .map(|(a, c)| fmath::abs(a - c))
                .fold(0.0, f64::max);
            if moved <= tol {
                break;
            }
        }
        let min = self.eigen(b).values[0];
        self.halfspace_violation(b) <= tol * 10.0 && min >= -tol * 10.0
    }
}

fn project_single_halfspace(b: &mut [f64], g: &[f64], h: f64, sense: ConstraintSense) {
    let val = dot(g, b);
    let gap = match sense {
        ConstraintSense::GreaterEq => h - val,
        ConstraintSense::LessEq => val - h,
    };
    if gap > 0.0 {
        let gg = dot(g, g);
        if gg == 0.0 {
            return;
        }
        let step = gap / gg;
        let sgn = match sense {
            ConstraintSense::GreaterEq => 1.0,
            ConstraintSense::LessEq => -1.0,
        };
        for (bk, gk) in b.iter_mut().zip(g) {
            *bk += sgn * step * gk;
        }
    }
}

/// Returns a Bloch vector reproducing the target exactly (up to the
/// projection tolerance) inside the constraint set, when one exists.
fn zero_residual_attempt(ctx: &FitContext<'_>, opts: &FitOptions) -> Option<(Vec<f64>, usize)> {
    let p = ctx.problem.target();
    let y: Vec<f64> = p.iter().zip(&ctx.q0).map(|(pi, q0)| pi - q0).collect();

    // The target must be reproducible by some unit-trace Hermitian operator.
    let y_range = ctx.m_svd.project_onto_range(&y, DEFAULT_RANK_TOL);
    if max_abs_diff(&y, &y_range) > 1e-11 {
        return None;
    }

    // Constraint operators inside the POVM span have data-determined
    // values; a violated one rules out a zero-residual fit immediately.
    for c in ctx.problem.constraints() {
        let va = RealVectorization::from_operator(&c.operator).into_coords();
        let a_range = ctx.e_svd.project_onto_range(&va, DEFAULT_RANK_TOL);
        if max_abs_diff(&va, &a_range) <= 1e-9 {
            let w = ctx.e_svd.pseudo_solve(&va, DEFAULT_RANK_TOL);
            let implied = dot(&w, p);
            let hopeless = match c.direction {
                ConstraintSense::GreaterEq => implied < c.bound - 1e-9,
                ConstraintSense::LessEq => implied > c.bound + 1e-9,
            };
            if hopeless {
                return None;
            }
        }
    }

    match_distribution(ctx, &y_range, opts.tol * 1e-3, opts.max_iter)
}

/// Finds a Bloch vector on the data-matching affine set `{M b = y}` that
/// is also PSD and satisfies the constraint half-spaces; `y` must lie in
/// the range of `M`.
///
/// Product-space Douglas-Rachford splitting, which keeps converging where
/// plain alternating projections crawl (thin intersections at
/// rank-deficient witnesses); a face-pinned linear solve snaps the last
/// few digits. Stalled progress far from the tolerance signals a
/// (numerically) empty intersection.
fn match_distribution(
    ctx: &FitContext<'_>,
    y: &[f64],
    tol: f64,
    cap: usize,
) -> Option<(Vec<f64>, usize)> {
    let k = ctx.n_bloch;
    let n_sets = 2 + ctx.lin_rows.len();
    let start = ctx.m_svd.pseudo_solve(y, DEFAULT_RANK_TOL);
    let mut z: Vec<Vec<f64>> = vec![start; n_sets];
    let mut avg = vec![0.0; k];
    let mut prev_check = f64::INFINITY;

    for cycle in 1..=cap {
        for slot in avg.iter_mut() {
            *slot = 0.0;
        }
        for zi in &z {
            for (a, v) in avg.iter_mut().zip(zi) {
                *a += v / n_sets as f64;
            }
        }
        for (set, zi) in z.iter_mut().enumerate() {
            let mut w: Vec<f64> = avg.iter().zip(zi.iter()).map(|(a, v)| 2.0 * a - v).collect();
            match set {
                0 => {
                    let residual: Vec<f64> = ctx
                        .m_rows
                        .iter()
                        .zip(y)
                        .map(|(row, yi)| yi - dot(row, &w))
                        .collect();
                    let correction = ctx.m_svd.pseudo_solve(&residual, DEFAULT_RANK_TOL);
                    for (wk, ck) in w.iter_mut().zip(&correction) {
                        *wk += ck;
                    }
                }
                1 => {
                    ctx.project_psd(&mut w);
                }
                j => {
                    let (g, h, sense) = &ctx.lin_rows[j - 2];
                    project_single_halfspace(&mut w, g, *h, *sense);
                }
            }
            for ((zk, wk), ak) in zi.iter_mut().zip(&w).zip(&avg) {
                *zk += wk - ak;
            }
        }

        if cycle % 16 == 0 {
            let v = match_violation(ctx, y, &avg);
            if v <= tol {
                return Some((avg, cycle));
            }
            if cycle % 256 == 0 && v <= 1e-3 {
                if let Some(exact) = face_data_solve(ctx, y, &avg, tol) {
                    return Some((exact, cycle));
                }
            }
            // An empty intersection shows up as a hard plateau; merely
            // slow progress (DR plateaus before snapping) is tolerated.
            if cycle % 4096 == 0 {
                if v > prev_check * 0.5 && v > 1e-6 {
                    return None;
                }
                prev_check = v;
            }
        }
    }
    let v = match_violation(ctx, y, &avg);
    if v <= tol {
        return Some((avg, cap));
    }
    face_data_solve(ctx, y, &avg, tol).map(|exact| (exact, cap))
}

fn match_violation(ctx: &FitContext<'_>, y: &[f64], b: &[f64]) -> f64 {
    let data = ctx
        .m_rows
        .iter()
        .zip(y)
        .map(|(row, yi)| fmath::abs(yi - dot(row, b)))
        .fold(0.0, f64::max);
    let min = ctx.eigen(b).values[0];
    data.max(ctx.halfspace_violation(b)).max((-min).max(0.0))
}

/// Finisher for thin data-matching intersections: joint Gauss-Newton on
/// the system {M b = y, rho(b) v_a = 0} over the Bloch correction and the
/// near-null vectors. The kernel-vector updates are parametrized in the
/// non-null eigendirections, which keeps the Jacobian well conditioned;
/// convergence is quadratic at simple and clustered zeros alike.
fn face_data_solve(
    ctx: &FitContext<'_>,
    y: &[f64],
    near: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let k = ctx.n_bloch;
    let d = ctx.dim;
    let mut current = near.to_vec();
    for _ in 0..14 {
        let eig = ctx.eigen(&current);
        let m = eig.values.iter().take_while(|&&l| l <= 1e-4).count();
        if m == 0 || m == d {
            return None;
        }
        let nulls: Vec<Vec<C64>> = (0..m).map(|i| eig.eigenvector(i)).collect();
        let others: Vec<(f64, Vec<C64>)> =
            (m..d).map(|i| (eig.values[i], eig.eigenvector(i))).collect();

        let n_unknowns = k + m * 2 * others.len();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for (row, yi) in ctx.m_rows.iter().zip(y) {
            let mut r = vec![0.0; n_unknowns];
            r[..k].copy_from_slice(row);
            rows.push(r);
            rhs.push(yi - dot(row, &current));
        }
        let rho_now = ctx.rho_op(&current);
        for (a, v) in nulls.iter().enumerate() {
            let gv: Vec<Vec<C64>> = ctx.gammas.iter().map(|g| g.matrix().apply(v)).collect();
            let rv = rho_now.matrix().apply(v);
            let dv_base = k + a * 2 * others.len();
            for r in 0..d {
                let mut row_re = vec![0.0; n_unknowns];
                let mut row_im = vec![0.0; n_unknowns];
                for (kk, col) in gv.iter().enumerate() {
                    row_re[kk] = col[r].re;
                    row_im[kk] = col[r].im;
                }
                for (jj, (lambda, uj)) in others.iter().enumerate() {
                    // rho0 (x + iy) u_j = lambda (x + iy) u_j[r]
                    let zr = lambda * uj[r].re;
                    let zi = lambda * uj[r].im;
                    row_re[dv_base + 2 * jj] = zr;
                    row_re[dv_base + 2 * jj + 1] = -zi;
                    row_im[dv_base + 2 * jj] = zi;
                    row_im[dv_base + 2 * jj + 1] = zr;
                }
                rows.push(row_re);
                rhs.push(-rv[r].re);
                rows.push(row_im);
                rhs.push(-rv[r].im);
            }
        }

        let svd = RealSvd::decompose(&rows);
        let correction = svd.pseudo_solve(&rhs, DEFAULT_RANK_TOL);
        for (c, delta) in current.iter_mut().zip(correction[..k].iter()) {
            *c += delta;
        }

        let v = match_violation(ctx, y, &current);
        if v <= tol {
            return Some(current);
        }
    }
    None
}

/// Epigraph LP with eigenvalue cuts. Upper bounds come from repaired
/// (exactly feasible) LP points; lower bounds from the outer LP and from
/// a dual (KKT) certificate recovered at the incumbent.
fn lp_phase(ctx: &FitContext<'_>, opts: &FitOptions, reject_above: Option<f64>) -> FitResult {
    let k = ctx.n_bloch;
    let pocs_tol = opts.tol * 1e-3;

    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let mut best_b: Option<Vec<f64>> = None;
    let mut best_u = f64::INFINITY;
    let mut lower = 0.0_f64;
    let mut rounds = 0;

    for round in 1..=MAX_LP_ROUNDS {
        rounds = round;
        let (b_lp, value) = match solve_epigraph_lp(ctx, &cuts) {
            LpOutcome::Infeasible => {
                // The LP is an outer relaxation; its emptiness certifies
                // that the true constraint set is empty.
                return FitResult {
                    bloch: BlochVector::new(vec![0.0; k]).expect("valid length"),
                    residual: f64::INFINITY,
                    status: FitStatus::Infeasible,
                    iterations: round,
                };
            }
            LpOutcome::Optimal { x, value } => {
                let b: Vec<f64> = x[..k].iter().map(|v| v - ctx.radius).collect();
                (b, value)
            }
            LpOutcome::Unbounded | LpOutcome::Stalled => break,
        };
        lower = lower.max(value).max(0.0);

        // A lower bound above the rejection threshold settles the only
        // question the caller has; report the best feasible iterate.
        if let Some(threshold) = reject_above {
            if lower > threshold {
                if best_b.is_none() {
                    let mut b_rep = b_lp.clone();
                    if ctx.repair(&mut b_rep, pocs_tol, REPAIR_CYCLES) {
                        best_b = Some(b_rep);
                    }
                }
                return match best_b {
                    Some(b) => finish(ctx, b, FitStatus::IterationLimit, round),
                    None => FitResult {
                        bloch: BlochVector::new(vec![0.0; k]).expect("valid length"),
                        residual: f64::INFINITY,
                        status: FitStatus::IterationLimit,
                        iterations: round,
                    },
                };
            }
        }

        // Try to realize the LP's proposed outcome distribution with an
        // actual state: success pulls the upper bound down onto the LP
        // value, closing the gap at once.
        let y_lp: Vec<f64> = ctx.m_rows.iter().map(|row| dot(row, &b_lp)).collect();
        if let Some((b_match, _)) = match_distribution(ctx, &y_lp, pocs_tol, 3000) {
            let u = ctx.objective(&b_match);
            if u < best_u {
                best_u = u;
                best_b = Some(b_match);
            }
        }

        if best_u - lower > opts.tol {
            let mut b_rep = b_lp.clone();
            if ctx.repair(&mut b_rep, pocs_tol, REPAIR_CYCLES) {
                // Descend within the feasible set toward the certified bound.
                let (b_pol, u) = polish(ctx, b_rep.clone(), lower, 400);
                if u < best_u {
                    best_u = u;
                    best_b = Some(b_pol);
                }
            }
        }

        if let Some(b) = &best_b {
            if best_u - lower > opts.tol {
                if let Some(dual) = dual_certificate(ctx, b) {
                    lower = lower.max(dual);
                }
            }
        }

        let gap = best_u - lower;
        if gap <= opts.tol || (round > 60 && gap <= GAP_CONTRACT) {
            break;
        }

        let mut added = add_cuts(ctx, &mut cuts, &b_lp, 1e-10);
        if let Some(b) = &best_b {
            added += add_cuts(ctx, cuts.as_mut(), b, 1e-8);
        }
        if added == 0 {
            break;
        }
    }

    match best_b {
        Some(b) => {
            let status = if best_u - lower <= GAP_CONTRACT {
                FitStatus::Converged
            } else {
                FitStatus::IterationLimit
            };
            finish(ctx, b, status, rounds)
        }
        None => FitResult {
            bloch: BlochVector::new(vec![0.0; k]).expect("valid length"),
            residual: f64::INFINITY,
            status: FitStatus::Infeasible,
            iterations: rounds,
        },
    }
}

fn solve_epigraph_lp(ctx: &FitContext<'_>, cuts: &[Vec<f64>]) -> LpOutcome {
    let (objective, rows) = epigraph_lp_rows(ctx, cuts);
    simplex::minimize(&objective, &rows)
}

fn epigraph_lp_rows(ctx: &FitContext<'_>, cuts: &[Vec<f64>]) -> (Vec<f64>, Vec<Row>) {
    let k = ctx.n_bloch;
    let n = ctx.problem.target().len();
    let r = ctx.radius;
    let d = ctx.dim as f64;

    // Variables: shifted Bloch coordinates xb = b + r (k of them), then the
    // epigraph variables t_i (n of them). All nonnegative.
    let n_vars = k + n;
    let mut objective = vec![0.0; n_vars];
    for t in objective[k..].iter_mut() {
        *t = 1.0;
    }

    let mut rows: Vec<Row> = Vec::with_capacity(2 * n + k + ctx.lin_rows.len() + cuts.len());
    let p = ctx.problem.target();
    for i in 0..n {
        let mrow = &ctx.m_rows[i];
        let shift = r * mrow.iter().sum::<f64>();
        // t_i + (M xb)_i >= p_i - q0_i + r * sum(M_i)
        let mut c1 = vec![0.0; n_vars];
        c1[..k].copy_from_slice(mrow);
        c1[k + i] = 1.0;
        rows.push(Row {
            coeffs: c1,
            sense: Sense::Ge,
            rhs: p[i] - ctx.q0[i] + shift,
        });
        // t_i - (M xb)_i >= q0_i - p_i - r * sum(M_i)
        let mut c2 = vec![0.0; n_vars];
        for (slot, v) in c2[..k].iter_mut().zip(mrow) {
            *slot = -v;
        }
        c2[k + i] = 1.0;
        rows.push(Row {
            coeffs: c2,
            sense: Sense::Ge,
            rhs: ctx.q0[i] - p[i] - shift,
        });
    }
    for j in 0..k {
        let mut c = vec![0.0; n_vars];
        c[j] = 1.0;
        rows.push(Row {
            coeffs: c,
            sense: Sense::Le,
            rhs: 2.0 * r,
        });
    }
    for (g, h, sense) in &ctx.lin_rows {
        let mut c = vec![0.0; n_vars];
        c[..k].copy_from_slice(g);
        let shift = r * g.iter().sum::<f64>();
        rows.push(Row {
            coeffs: c,
            sense: match sense {
                ConstraintSense::GreaterEq => Sense::Ge,
                ConstraintSense::LessEq => Sense::Le,
            },
            rhs: h + shift,
        });
    }
    for w in cuts {
        // w . b >= -1/d  (unit eigenvector v: <v|rho(b)|v> >= 0)
        let mut c = vec![0.0; n_vars];
        c[..k].copy_from_slice(w);
        let shift = r * w.iter().sum::<f64>();
        rows.push(Row {
            coeffs: c,
            sense: Sense::Ge,
            rhs: -1.0 / d + shift,
        });
    }

    (objective, rows)
}

/// Polyak subgradient descent restricted to the feasible set, aiming at a
/// known lower bound. Piecewise-linear objectives have sharp minima, so
/// the iteration converges linearly once the bound is tight.
fn polish(
    ctx: &FitContext<'_>,
    start: Vec<f64>,
    target: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut best_x = x.clone();
    let mut best_f = ctx.objective(&x);
    for _ in 0..iterations {
        let (f, grad) = objective_subgradient(ctx, &x);
        if f < best_f {
            best_f = f;
            best_x = x.clone();
        }
        let gap = f - target;
        if gap <= 1e-12 {
            break;
        }
        let gg = dot(&grad, &grad);
        if gg < 1e-26 {
            break;
        }
        let step = gap / gg;
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= step * gi;
        }
        if !ctx.project_feasible(&mut x, 1e-12, 150) {
            break;
        }
    }
    (best_x, best_f)
}

fn objective_subgradient(ctx: &FitContext<'_>, b: &[f64]) -> (f64, Vec<f64>) {
    let p = ctx.problem.target();
    let q = ctx.q_of(b);
    let mut value = 0.0;
    let mut grad = vec![0.0; ctx.n_bloch];
    for (i, (qi, pi)) in q.iter().zip(p).enumerate() {
        let diff = qi - pi;
        value += fmath::abs(diff);
        if diff != 0.0 {
            let s = if diff > 0.0 { 1.0 } else { -1.0 };
            for (gk, mk) in grad.iter_mut().zip(&ctx.m_rows[i]) {
                *gk += s * mk;
            }
        }
    }
    (value, grad)
}

/// Certified lower bound from Lagrangian duality, recovered at a
/// near-optimal feasible point.
///
/// With `r = p - q0`, any `s` in `[-1,1]^N`, `mu >= 0` on the constraints
/// (written as `g.b >= h`), and PSD `Z` give the bound
/// `s.r + mu.h - tr[Z]/d - |xi| R`, where
/// `xi = M^T s + sum mu g + (tr[Z Gamma_k])_k` is the stationarity
/// residual and `R` bounds the feasible Bloch norm. The multipliers are
/// recovered from the active structure at `b_hat` by a small LP, the `Z`
/// block is projected onto the PSD cone, and the bound is re-evaluated
/// exactly, so it is valid regardless of how well the LP did.
fn dual_certificate(ctx: &FitContext<'_>, b_hat: &[f64]) -> Option<f64> {
    let k = ctx.n_bloch;
    let n = ctx.problem.target().len();
    let r: Vec<f64> = ctx
        .problem
        .target()
        .iter()
        .zip(&ctx.q0)
        .map(|(p, q0)| p - q0)
        .collect();

    // Sign pattern of the objective pieces at b_hat.
    let mut sign = vec![0.0_f64; n];
    let mut free_s = Vec::new();
    for i in 0..n {
        let e = r[i] - dot(&ctx.m_rows[i], b_hat);
        if fmath::abs(e) > 1e-9 {
            sign[i] = if e > 0.0 { 1.0 } else { -1.0 };
        } else {
            free_s.push(i);
        }
    }

    // Constraints in g.b >= h form; only (near-)active ones get multipliers.
    let mut active: Vec<(Vec<f64>, f64)> = Vec::new();
    for (g, h, sense) in &ctx.lin_rows {
        let (gh, hh) = match sense {
            ConstraintSense::GreaterEq => (g.clone(), *h),
            ConstraintSense::LessEq => (g.iter().map(|x| -x).collect(), -*h),
        };
        if dot(&gh, b_hat) - hh <= 1e-7 {
            active.push((gh, hh));
        }
    }

    // Near-null eigenvectors of rho(b_hat) support the PSD multiplier.
    let eig = ctx.eigen(b_hat);
    let null_vecs: Vec<Vec<C64>> = eig
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l <= 1e-7)
        .map(|(idx, _)| eig.eigenvector(idx))
        .collect();
    let m = null_vecs.len();

    // Hermitian basis of the Z block, as d x d operators.
    let mut z_basis: Vec<HermitianOperator> = Vec::with_capacity(m * m);
    for a in 0..m {
        z_basis.push(HermitianOperator::symmetrized(crate::linalg::ComplexMatrix::outer(
            &null_vecs[a],
        )));
    }
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    for a in 0..m {
        for b in (a + 1)..m {
            let outer_ab = crate::linalg::ComplexMatrix::outer_pair(&null_vecs[a], &null_vecs[b]);
            let outer_ba = outer_ab.adjoint();
            z_basis.push(HermitianOperator::symmetrized(
                (&outer_ab + &outer_ba).scaled(inv_sqrt2),
            ));
            let i_ab = outer_ab.scaled_c(C64::new(0.0, -inv_sqrt2));
            let i_ba = outer_ba.scaled_c(C64::new(0.0, inv_sqrt2));
            z_basis.push(HermitianOperator::symmetrized(&i_ab + &i_ba));
        }
    }
    let z_rows: Vec<Vec<f64>> = z_basis
        .iter()
        .map(|z| {
            ctx.gammas
                .iter()
                .map(|g| crate::linalg::hs_inner_unchecked(z, g))
                .collect()
        })
        .collect();

    // Recovery LP: maximize the dual objective subject to stationarity.
    // Variables: x_i = s_i + 1 for free signs, mu_j, y_h = y+ - y-.
    let n_free = free_s.len();
    let n_act = active.len();
    let n_z = z_basis.len();
    let n_vars = n_free + n_act + 2 * n_z;
    const BIG: f64 = 1e3;

    let mut objective = vec![0.0; n_vars];
    for (slot, &i) in free_s.iter().enumerate() {
        objective[slot] = -r[i];
    }
    for (j, (_, hh)) in active.iter().enumerate() {
        objective[n_free + j] = -hh;
    }
    for h in 0..n_z {
        let tr = z_basis[h].trace() / ctx.dim as f64;
        objective[n_free + n_act + 2 * h] = tr;
        objective[n_free + n_act + 2 * h + 1] = -tr;
    }

    let mut rows: Vec<Row> = Vec::with_capacity(k + n_free + n_act + 2 * n_z);
    for coord in 0..k {
        let mut coeffs = vec![0.0; n_vars];
        let mut rhs = 0.0;
        for i in 0..n {
            if sign[i] != 0.0 {
                rhs -= sign[i] * ctx.m_rows[i][coord];
            }
        }
        for (slot, &i) in free_s.iter().enumerate() {
            coeffs[slot] = ctx.m_rows[i][coord];
            rhs += ctx.m_rows[i][coord]; // from the s = x - 1 shift
        }
        for (j, (gh, _)) in active.iter().enumerate() {
            coeffs[n_free + j] = gh[coord];
        }
        for h in 0..n_z {
            coeffs[n_free + n_act + 2 * h] = z_rows[h][coord];
            coeffs[n_free + n_act + 2 * h + 1] = -z_rows[h][coord];
        }
        rows.push(Row {
            coeffs,
            sense: Sense::Eq,
            rhs,
        });
    }
    for slot in 0..n_free {
        let mut coeffs = vec![0.0; n_vars];
        coeffs[slot] = 1.0;
        rows.push(Row {
            coeffs,
            sense: Sense::Le,
            rhs: 2.0,
        });
    }
    for v in n_free..n_vars {
        let mut coeffs = vec![0.0; n_vars];
        coeffs[v] = 1.0;
        rows.push(Row {
            coeffs,
            sense: Sense::Le,
            rhs: BIG,
        });
    }

    let LpOutcome::Optimal { x, .. } = simplex::minimize(&objective, &rows) else {
        return None;
    };

    // Assemble the multipliers, forcing them into their cones.
    let mut s = sign;
    for (slot, &i) in free_s.iter().enumerate() {
        s[i] = (x[slot] - 1.0).clamp(-1.0, 1.0);
    }
    let mu: Vec<f64> = (0..n_act).map(|j| x[n_free + j].max(0.0)).collect();

    let z = if n_z > 0 {
        let coords: Vec<f64> = (0..n_z)
            .map(|h| x[n_free + n_act + 2 * h] - x[n_free + n_act + 2 * h + 1])
            .collect();
        let small = RealVectorization::new(m, coords).to_operator();
        let small_eig = eigen_hermitian(&small);
        let mut z_op = HermitianOperator::identity(ctx.dim).scaled(0.0);
        for (idx, &lambda) in small_eig.values.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let combo = small_eig.eigenvector(idx);
            // u = sum_a combo[a] * v_a, a vector in the big space
            let mut u = vec![C64::new(0.0, 0.0); ctx.dim];
            for (a, va) in null_vecs.iter().enumerate() {
                for (slot, amp) in u.iter_mut().zip(va) {
                    *slot += combo[a] * amp;
                }
            }
            z_op = z_op.add(&HermitianOperator::projector(&u).scaled(lambda));
        }
        z_op
    } else {
        HermitianOperator::identity(ctx.dim).scaled(0.0)
    };

    // Exact re-evaluation of stationarity and the bound.
    let w_z: Vec<f64> = ctx
        .gammas
        .iter()
        .map(|g| crate::linalg::hs_inner_unchecked(&z, g))
        .collect();
    let mut xi = w_z;
    for i in 0..n {
        if s[i] != 0.0 {
            for (slot, mik) in xi.iter_mut().zip(&ctx.m_rows[i]) {
                *slot += s[i] * mik;
            }
        }
    }
    for (j, (gh, _)) in active.iter().enumerate() {
        for (slot, gk) in xi.iter_mut().zip(gh) {
            *slot += mu[j] * gk;
        }
    }
    let xi_norm = fmath::sqrt(dot(&xi, &xi));

    let mut bound = -z.trace() / ctx.dim as f64 - xi_norm * ctx.radius;
    for i in 0..n {
        bound += s[i] * r[i];
    }
    for (j, (_, hh)) in active.iter().enumerate() {
        bound += mu[j] * hh;
    }
    Some(bound)
}

/// Adds supporting half-spaces `<v|rho(b)|v> >= 0` for every eigenvector
/// of `rho(at)` whose eigenvalue is below the threshold.
fn add_cuts(ctx: &FitContext<'_>, cuts: &mut Vec<Vec<f64>>, at: &[f64], threshold: f64) -> usize {
    let eig = ctx.eigen(at);
    let mut added = 0;
    for (idx, &val) in eig.values.iter().enumerate() {
        if val >= threshold {
            break;
        }
        let v = eig.eigenvector(idx);
        let w: Vec<f64> = ctx.gammas.iter().map(|g| g.expectation(&v)).collect();
        let norm = fmath::sqrt(dot(&w, &w));
        if norm < 1e-13 {
            continue;
        }
        let duplicate = cuts.iter().any(|existing| {
            let en = fmath::sqrt(dot(existing, existing));
            fmath::abs(dot(existing, &w)) / (en * norm) > 1.0 - 1e-9
        });
        if !duplicate {
            cuts.push(w);
            added += 1;
        }
    }
    added
}

/// Builds the final result; recomputes the residual through the Born rule
/// and downgrades the status if the feasibility certificate fails.
fn finish(ctx: &FitContext<'_>, b: Vec<f64>, status: FitStatus, iterations: usize) -> FitResult {
    let bloch = BlochVector::new(b.clone()).expect("Bloch length fixed by context");
    let residual = match bloch_to_density(&bloch) {
        Ok(rho) => {
            let q = crate::povm::born_probabilities(ctx.problem.povm(), &rho)
                .expect("dimensions match by construction");
            l1_distance(ctx.problem.target(), &q).expect("equal lengths")
        }
        Err(_) => ctx.objective(&b),
    };

    let mut status = status;
    if status == FitStatus::Converged {
        let min = ctx.eigen(&b).values[0];
        if min < -FEASIBILITY_CERT || ctx.halfspace_violation(&b) > FEASIBILITY_CERT {
            status = FitStatus::IterationLimit;
        }
    }
    FitResult {
        bloch,
        residual,
        status,
        iterations,
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    let mut found = false;
    for (i, &v) in sorted.iter().enumerate() {
        acc += v;
        let candidate = (acc - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
            found = true;
        }
    }
    debug_assert!(found);
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| fmath::abs(a - b))
        .fold(0.0, f64::max)
}
