//! Slow, algorithmically independent reference solver used to cross-check
//! the primary l1 fit.
//!
//! Exact-penalty subgradient descent with Polyak-type steps and restarts:
//! no epigraph variables, no linear programming, no cutting planes. On the
//! sharp piecewise-linear objectives produced by these fits the scheme
//! reaches ~1e-8 accuracy, enough to certify the primary solver at the
//! 1e-6 agreement level.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::optimizer::{dot, ConstraintSense, FitContext, FitProblem};

/// Penalty weight making the constrained and penalized minima coincide;
/// generous compared to the multipliers these programs exhibit.
const PENALTY: f64 = 32.0;

/// Best feasible objective value found by penalized subgradient descent,
/// or `None` when not even a feasible point could be produced.
pub fn reference_l1_fit(problem: &FitProblem<'_>, iterations: usize) -> Option<f64> {
    let ctx = FitContext::new(problem);
    let k = ctx.n_bloch;

    let mut x = vec![0.0; k];
    if !ctx.repair(&mut x, 1e-12, 6000) {
        return None;
    }

    let mut x_best = x.clone();
    let mut best = penalized(&ctx, &x).0;
    let mut delta = (best * 0.25).max(1e-5);
    let mut since_improvement = 0usize;

    for _ in 0..iterations {
        let (value, grad) = penalized(&ctx, &x);
        if value < best - 1e-15 {
            best = value;
            x_best = x.clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }

        let gg = dot(&grad, &grad);
        if gg < 1e-26 {
            break;
        }
        let target = (best - delta).max(0.0);
        let step = ((value - target) / gg).max(0.0);
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi = (*xi - step * gi).clamp(-ctx.radius, ctx.radius);
        }

        if since_improvement > 400 {
            delta *= 0.5;
            since_improvement = 0;
            x = x_best.clone();
            if delta < 1e-12 {
                break;
            }
        }
    }

    // Nearest-point projection for the final repair: plain cyclic
    // projections can wander along the feasible boundary and drift the
    // objective at the 1e-6 level.
    if !ctx.project_feasible(&mut x_best, 1e-13, 8000) {
        return None;
    }
    Some(ctx.objective(&x_best))
}

/// Objective plus exact penalty for PSD and half-space violations, with a
/// subgradient.
fn penalized(ctx: &FitContext<'_>, b: &[f64]) -> (f64, Vec<f64>) {
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

    for (g, h, sense) in &ctx.lin_rows {
        let val = dot(g, b);
        match sense {
            ConstraintSense::GreaterEq => {
                if val < *h {
                    value += PENALTY * (h - val);
                    for (gk, gi) in grad.iter_mut().zip(g) {
                        *gk -= PENALTY * gi;
                    }
                }
            }
            ConstraintSense::LessEq => {
                if val > *h {
                    value += PENALTY * (val - h);
                    for (gk, gi) in grad.iter_mut().zip(g) {
                        *gk += PENALTY * gi;
                    }
                }
            }
        }
    }

    let eig = ctx.eigen(b);
    let min = eig.values[0];
    if min < 0.0 {
        value += PENALTY * (-min);
        let v = eig.eigenvector(0);
        for (gk, gamma) in grad.iter_mut().zip(&ctx.gammas) {
            *gk -= PENALTY * gamma.expectation(&v);
        }
    }

    (value, grad)
}
