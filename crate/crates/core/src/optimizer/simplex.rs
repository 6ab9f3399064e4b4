//! Dense two-phase primal simplex.
//!
//! Sized for the epigraph programs produced by the l1 fit: tens of
//! structural variables, a few hundred rows once PSD cuts accumulate.
//! Dantzig pricing with a permanent switch to Bland's rule if the
//! objective stalls, which rules out cycling.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

const ENTER_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    #[allow(dead_code)] // not emitted by the epigraph builder, kept for completeness
    Eq,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    /// Minimizer over `x >= 0` with the objective value.
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    /// Iteration cap hit; should not occur on well-scaled inputs.
    Stalled,
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + slack + artificial (rhs kept separately)
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
}

/// Minimizes `objective . x` over `x >= 0` subject to the rows.
pub fn minimize(objective: &[f64], rows: &[Row]) -> LpOutcome {
    let n = objective.len();
    let m = rows.len();

    // Count auxiliary columns.
    let mut n_slack = 0;
    let mut n_art = 0;
    for r in rows {
        // After rhs normalization a Ge row with negative rhs becomes Le.
        let sense = effective_sense(r);
        match sense {
            Sense::Le => n_slack += 1,
            Sense::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Sense::Eq => n_art += 1,
        }
    }

    let cols = n + n_slack + n_art;
    let mut t = Tableau {
        rows: m,
        cols,
        a: vec![vec![0.0; cols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        artificial_start: n + n_slack,
    };

    let mut slack_idx = n;
    let mut art_idx = t.artificial_start;
    for (i, r) in rows.iter().enumerate() {
        let flip = r.rhs < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for (j, &c) in r.coeffs.iter().enumerate() {
            t.a[i][j] = sgn * c;
        }
        t.rhs[i] = sgn * r.rhs;
        match effective_sense(r) {
            Sense::Le => {
                t.a[i][slack_idx] = 1.0;
                t.basis[i] = slack_idx;
                slack_idx += 1;
            }
            Sense::Ge => {
                t.a[i][slack_idx] = -1.0;
                slack_idx += 1;
                t.a[i][art_idx] = 1.0;
                t.basis[i] = art_idx;
                art_idx += 1;
            }
            Sense::Eq => {
                t.a[i][art_idx] = 1.0;
                t.basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    // Phase 1: drive the artificials to zero.
    if n_art > 0 {
        let mut phase1_cost = vec![0.0; cols];
        for j in t.artificial_start..cols {
            phase1_cost[j] = 1.0;
        }
        match run_simplex(&mut t, &phase1_cost, cols) {
            SimplexEnd::Optimal(value) => {
                if value > FEAS_TOL {
                    return LpOutcome::Infeasible;
                }
            }
            SimplexEnd::Unbounded => return LpOutcome::Infeasible,
            SimplexEnd::Stalled => return LpOutcome::Stalled,
        }
        // Pivot any artificial still basic (at zero) out of the basis when
        // possible; a row with no eligible pivot is redundant and inert.
        for i in 0..m {
            if t.basis[i] >= t.artificial_start {
                if let Some(j) = (0..t.artificial_start)
                    .find(|&j| fmath::abs(t.a[i][j]) > PIVOT_TOL)
                {
                    t.pivot(i, j);
                }
            }
        }
    }

    // Phase 2: real objective; artificial columns barred from entering.
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(objective);
    let enter_limit = t.artificial_start;
    match run_simplex(&mut t, &cost, enter_limit) {
        SimplexEnd::Optimal(_) => {
            let mut x = vec![0.0; n];
            for i in 0..m {
                if t.basis[i] < n {
                    x[t.basis[i]] = t.rhs[i];
                }
            }
            let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            LpOutcome::Optimal { x, value }
        }
        SimplexEnd::Unbounded => LpOutcome::Unbounded,
        SimplexEnd::Stalled => LpOutcome::Stalled,
    }
}

fn effective_sense(r: &Row) -> Sense {
    if r.rhs < 0.0 {
        match r.sense {
            Sense::Le => Sense::Ge,
            Sense::Ge => Sense::Le,
            Sense::Eq => Sense::Eq,
        }
    } else {
        r.sense
    }
}

enum SimplexEnd {
    Optimal(f64),
    Unbounded,
    Stalled,
}

/// Pivots until the reduced costs over columns `0..enter_limit` are
/// nonnegative. Returns the objective value for the supplied cost vector.
fn run_simplex(t: &mut Tableau, cost: &[f64], enter_limit: usize) -> SimplexEnd {
    let m = t.rows;

    // Reduced costs r_j = c_j - c_B B^-1 A_j and value c_B B^-1 b.
    let mut reduced = cost.to_vec();
    let mut value = 0.0;
    for i in 0..m {
        let cb = cost[t.basis[i]];
        if cb != 0.0 {
            for j in 0..t.cols {
                reduced[j] -= cb * t.a[i][j];
            }
            value += cb * t.rhs[i];
        }
    }

    let cap = 400 * (m + t.cols);
    let stall_window = 4 * (m + t.cols);
    let mut bland = false;
    let mut since_improvement = 0;
    let mut best_value = value;

    for _ in 0..cap {
        let entering = if bland {
            (0..enter_limit).find(|&j| reduced[j] < -ENTER_TOL)
        } else {
            let mut best = None;
            let mut best_r = -ENTER_TOL;
            for (j, &r) in reduced.iter().enumerate().take(enter_limit) {
                if r < best_r {
                    best_r = r;
                    best = Some(j);
                }
            }
            best
        };
        let Some(j) = entering else {
            return SimplexEnd::Optimal(value);
        };

        // Ratio test; smallest basis index breaks ties.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = t.a[i][j];
            if a > PIVOT_TOL {
                let ratio = t.rhs[i] / a;
                let better = ratio < best_ratio - 1e-12
                    || (fmath::abs(ratio - best_ratio) <= 1e-12
                        && leave.map_or(true, |l| t.basis[i] < t.basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(i) = leave else {
            return SimplexEnd::Unbounded;
        };

        t.pivot(i, j);
        // Update the reduced-cost row alongside.
        let rj = reduced[j];
        if rj != 0.0 {
            for col in 0..t.cols {
                reduced[col] -= rj * t.a[i][col];
            }
            value += rj * t.rhs[i];
        }

        if value < best_value - 1e-13 {
            best_value = value;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement > stall_window {
                bland = true;
            }
        }
    }
    SimplexEnd::Stalled
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        let inv = 1.0 / p;
        for v in self.a[row].iter_mut() {
            *v *= inv;
        }
        self.rhs[row] *= inv;
        self.a[row][col] = 1.0; // exact

        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let factor = self.a[i][col];
            if factor == 0.0 {
                continue;
            }
            let (pivot_row, this_row) = if i < row {
                let (head, tail) = self.a.split_at_mut(row);
                (&tail[0], &mut head[i])
            } else {
                let (head, tail) = self.a.split_at_mut(i);
                (&head[row], &mut tail[0])
            };
            for (t, &pv) in this_row.iter_mut().zip(pivot_row) {
                *t -= factor * pv;
            }
            this_row[col] = 0.0; // exact
            self.rhs[i] -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }
}
