//! Small dense SVD and truncation rules.

use crate::error::{Error, Result};
use crate::kernels::dot;
use crate::tensor::MatRef;
use crate::tsqr::TriangularFactor;

/// Sweep limit for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 30;

/// Singular values at or below `RANK_RTOL * sigma_1` are treated as zero when
/// choosing ranks.
pub const RANK_RTOL: f64 = 1e-12;

/// One-sided Jacobi SVD of a general matrix.
#[derive(Clone, Debug)]
pub struct JacobiSvd {
    pub rows: usize,
    pub cols: usize,
    /// `U * diag(sigma)`, `rows x cols`, column-major.
    pub us: Vec<f64>,
    /// Nonincreasing.
    pub sigma: Vec<f64>,
    /// `cols x cols`, column-major.
    pub v: Vec<f64>,
}

/// SVD of a triangular factor, `R = U_bar diag(sigma) V^T`.
#[derive(Clone, Debug)]
pub struct SmallSvd {
    pub m: usize,
    pub u_bar: Vec<f64>,
    pub sigma: Vec<f64>,
    pub v: Vec<f64>,
}

impl SmallSvd {
    /// First `r` columns of `V` as an `m x r` view.
    pub fn v_leading(&self, r: usize) -> MatRef<'_> {
        MatRef::new(&self.v[..self.m * r], self.m, r, self.m).expect("square buffer")
    }
}

/// Orthogonalizes the columns of `a` by plane rotations and returns the
/// rotated columns with their norms, sorted nonincreasing.
pub fn jacobi_svd(a: MatRef<'_>) -> Result<JacobiSvd> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut w = a.to_col_major();
    let mut v = vec![0.0; cols * cols];
    for i in 0..cols {
        v[i + i * cols] = 1.0;
    }
    let tol = f64::EPSILON * 100f64.max(4.0 * (rows as f64).sqrt());
    // Pairs of columns at rounding level of the whole matrix are left alone;
    // their products would underflow and never meet the relative test.
    let floor = tol * f64::EPSILON * dot(&w, &w);
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let (cp, cq) = (&w[p * rows..(p + 1) * rows], &w[q * rows..(q + 1) * rows]);
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma.abs() <= floor || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, rows, p, q, c, s);
                rotate(&mut v, cols, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Convergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..cols)
        .map(|j| dot(&w[j * rows..(j + 1) * rows], &w[j * rows..(j + 1) * rows]).sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut us = Vec::with_capacity(rows * cols);
    let mut vs = Vec::with_capacity(cols * cols);
    for &j in &order {
        us.extend_from_slice(&w[j * rows..(j + 1) * rows]);
        vs.extend_from_slice(&v[j * cols..(j + 1) * cols]);
    }
    Ok(JacobiSvd {
        rows,
        cols,
        us,
        sigma: order.iter().map(|&j| norms[j]).collect(),
        v: vs,
    })
}

fn rotate(w: &mut [f64], ld: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = w.split_at_mut(q * ld);
    let cp = &mut head[p * ld..(p + 1) * ld];
    let cq = &mut tail[..ld];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Rows of a factor at or below this fraction of its norm are treated as
/// zero. Factors of short matrices carry such rows from the breakdown guard.
const NEGLIGIBLE_ROW: f64 = 1e-100;

/// SVD of an `m x m` triangular factor.
///
/// When only `k < m` rows are significant, Jacobi runs on their transpose
/// (`m x k`) instead, which costs `O(m k^2)` per sweep rather than `O(m^3)`.
pub fn small_svd(r: &TriangularFactor) -> Result<SmallSvd> {
    let m = r.order();
    let a = r.as_mat();
    let norms: Vec<f64> = (0..m)
        .map(|i| (i..m).map(|j| a.get(i, j) * a.get(i, j)).sum::<f64>().sqrt())
        .collect();
    let total = norms.iter().map(|x| x * x).sum::<f64>().sqrt();
    let keep: Vec<usize> = (0..m).filter(|&i| norms[i] > NEGLIGIBLE_ROW * total).collect();
    if keep.len() < m {
        return small_svd_rows(r, &keep);
    }
    let j = jacobi_svd(a)?;
    let mut u_bar = j.us;
    let missing = normalize_columns(&mut u_bar, m, &j.sigma);
    complete_basis(&mut u_bar, m, &missing);
    Ok(SmallSvd {
        m,
        u_bar,
        sigma: j.sigma,
        v: j.v,
    })
}

/// Jacobi on the transpose of the rows listed in `keep`.
fn small_svd_rows(r: &TriangularFactor, keep: &[usize]) -> Result<SmallSvd> {
    let m = r.order();
    let k = keep.len();
    let a = r.as_mat();
    let mut t = vec![0.0; m * k];
    for (c, &i) in keep.iter().enumerate() {
        for j in i..m {
            t[j + m * c] = a.get(i, j);
        }
    }
    let j = jacobi_svd(MatRef::new(&t, m, k, m)?)?;
    let mut sigma = j.sigma;
    sigma.resize(m, 0.0);
    let mut v = j.us;
    v.resize(m * m, 0.0);
    let missing = normalize_columns(&mut v, m, &sigma);
    complete_basis(&mut v, m, &missing);
    let mut u_bar = vec![0.0; m * m];
    for c in 0..k {
        for (t, &i) in keep.iter().enumerate() {
            u_bar[i + m * c] = j.v[t + k * c];
        }
    }
    complete_basis(&mut u_bar, m, &(k..m).collect::<Vec<_>>());
    Ok(SmallSvd { m, u_bar, sigma, v })
}

/// Divides column `c` by `sigma[c]`; returns the columns left without a
/// direction.
fn normalize_columns(u: &mut [f64], m: usize, sigma: &[f64]) -> Vec<usize> {
    let mut missing = Vec::new();
    for (c, &s) in sigma.iter().enumerate() {
        let col = &mut u[c * m..(c + 1) * m];
        if s > 0.0 && s.is_finite() {
            col.iter_mut().for_each(|x| *x /= s);
        } else {
            col.fill(0.0);
            missing.push(c);
        }
    }
    missing
}

/// Fills the listed columns with unit vectors orthogonal to all others.
///
/// Each new column starts from the unit vector with the largest component
/// outside the current span, read off the diagonal of the projector.
fn complete_basis(u: &mut [f64], m: usize, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let mut filled: Vec<bool> = vec![true; m];
    for &c in missing {
        filled[c] = false;
    }
    let mut outside = vec![1.0; m];
    let absorb = |outside: &mut [f64], col: &[f64]| {
        outside.iter_mut().zip(col).for_each(|(o, x)| *o -= x * x);
    };
    for k in (0..m).filter(|&k| filled[k]) {
        absorb(&mut outside, &u[k * m..(k + 1) * m]);
    }
    for &c in missing {
        let e = (0..m)
            .max_by(|&i, &j| outside[i].total_cmp(&outside[j]).then(j.cmp(&i)))
            .expect("m > 0");
        let mut x = vec![0.0; m];
        x[e] = 1.0;
        for _ in 0..2 {
            for k in (0..m).filter(|&k| filled[k]) {
                let col = &u[k * m..(k + 1) * m];
                let g = dot(col, &x);
                x.iter_mut().zip(col).for_each(|(xi, ci)| *xi -= g * ci);
            }
        }
        let n = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|xi| *xi /= n);
        absorb(&mut outside, &x);
        u[c * m..(c + 1) * m].copy_from_slice(&x);
        filled[c] = true;
    }
}

/// `min(r_max, r_delta)` with `r_delta` the smallest `j` whose discarded tail
/// `sigma_{j+1}^2 + ...` is at most `delta^2`, clamped to at least 1.
pub fn select_rank(sigma: &[f64], delta: f64, r_max: usize) -> usize {
    let d2 = delta * delta;
    let mut tail = 0.0;
    let mut r = sigma.len();
    for j in (0..sigma.len()).rev() {
        tail += sigma[j] * sigma[j];
        if tail > d2 {
            break;
        }
        r = j;
    }
    r.min(r_max).max(1)
}

/// Per-step truncation threshold `eps / sqrt(d - 1) * norm`.
pub fn derive_delta(norm: f64, eps: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::DegenerateDimension(d));
    }
    Ok(eps / ((d - 1) as f64).sqrt() * norm)
}

/// Rank for one step: the first `cap` values are considered, values within
/// rounding of zero are dropped, then [`select_rank`] applies.
pub(crate) fn truncation_rank(sigma: &[f64], delta: f64, r_max: usize, cap: usize) -> usize {
    let cap = cap.min(sigma.len()).max(1);
    let floor = sigma.first().copied().unwrap_or(0.0) * RANK_RTOL;
    let s: Vec<f64> = sigma[..cap]
        .iter()
        .map(|&x| if x <= floor { 0.0 } else { x })
        .collect();
    select_rank(&s, delta, r_max).min(cap)
}
