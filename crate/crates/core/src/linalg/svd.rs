//! One-sided (Hestenes) Jacobi SVD over the reals.
//!
//! Only what rank and null-space extraction need: singular values and right
//! singular vectors, both to near machine precision for the small stacks
//! produced by operator vectorization.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

const MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-15;

/// Thin SVD data of an m x n real matrix: `A = U S V^T`, kept as
/// `scaled_u[j] = sigma_j * u_j` (length m) and `v[j]` (length n), with
/// singular values descending.
pub(crate) struct RealSvd {
    pub singular: Vec<f64>,
    pub scaled_u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl RealSvd {
    /// Decomposes a matrix given as rows.
    pub fn decompose(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let n = if m == 0 { 0 } else { rows[0].len() };
        // Work on columns.
        let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| rows[i][j]).collect()).collect();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let (alpha, beta, gamma) = col_moments(&a[i], &a[j]);
                    if gamma * gamma <= ORTHO_TOL * ORTHO_TOL * alpha * beta
                        || alpha == 0.0
                        || beta == 0.0
                    {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                    let t = sign / (fmath::abs(zeta) + fmath::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / fmath::sqrt(1.0 + t * t);
                    let s = c * t;
                    rotate_pair(&mut a, i, j, c, s);
                    rotate_pair(&mut v, i, j, c, s);
                }
            }
            if !rotated {
                break;
            }
        }

        let mut cols: Vec<(f64, Vec<f64>, Vec<f64>)> = a
            .into_iter()
            .zip(v)
            .map(|(col, vcol)| {
                let sigma = fmath::sqrt(col.iter().map(|x| x * x).sum());
                (sigma, col, vcol)
            })
            .collect();
        cols.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

        let mut singular = Vec::with_capacity(n);
        let mut scaled_u = Vec::with_capacity(n);
        let mut v_sorted = Vec::with_capacity(n);
        for (sigma, col, vcol) in cols {
            singular.push(sigma);
            scaled_u.push(col);
            v_sorted.push(vcol);
        }
        RealSvd {
            singular,
            scaled_u,
            v: v_sorted,
        }
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let max = self.singular.first().copied().unwrap_or(0.0);
        if max == 0.0 {
            return 0;
        }
        self.singular.iter().filter(|&&s| s > rel_tol * max).count()
    }

    /// Orthonormal basis of the right null space (columns of V whose
    /// singular values fall below the relative threshold).
    pub fn null_space(&self, rel_tol: f64) -> Vec<Vec<f64>> {
        let r = self.rank(rel_tol);
        self.v[r..].to_vec()
    }

    /// Minimum-norm least-squares solve `A x ~= b` via the decomposition.
    pub fn pseudo_solve(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let n = self.v.first().map_or(0, Vec::len);
        let mut x = vec![0.0; n];
        let r = self.rank(rel_tol);
        for k in 0..r {
            let sigma2 = self.singular[k] * self.singular[k];
            // (u_k . b) / sigma_k = (scaled_u_k . b) / sigma_k^2
            let coeff = dot(&self.scaled_u[k], b) / sigma2;
            for (xi, vi) in x.iter_mut().zip(&self.v[k]) {
                *xi += coeff * vi;
            }
        }
        x
    }

    /// Projects `b` onto the column space of `A` (span of the left
    /// singular vectors with nonzero singular value).
    pub fn project_onto_range(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let m = self.scaled_u.first().map_or(0, Vec::len);
        let mut out = vec![0.0; m];
        let r = self.rank(rel_tol);
        for k in 0..r {
            let sigma2 = self.singular[k] * self.singular[k];
            let coeff = dot(&self.scaled_u[k], b) / sigma2;
            for (oi, ui) in out.iter_mut().zip(&self.scaled_u[k]) {
                *oi += coeff * ui;
            }
        }
        out
    }
}

fn col_moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(j);
    let ci = &mut head[i];
    let cj = &mut tail[0];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
