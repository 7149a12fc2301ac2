//! Q-less tall-skinny QR.
//!
//! Each worker owns a contiguous range of row blocks and folds them into its
//! own triangular factor with [`reduce_block`]. Worker factors are then
//! combined in ascending worker order, so the result only depends on the
//! input, the block size and the worker count.

use rayon::prelude::*;

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::kernels::{axpy, axpy4, dot, dot4};
use crate::tensor::{MatRef, PaddedMatrix};

/// Working-set budget used to size row blocks.
pub const L2_BUDGET_BYTES: usize = 256 * 1024;

/// Panel width below which column blocking stops recursing.
const PANEL_WIDTH: usize = 8;

/// Upper triangular `m x m` factor stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularFactor {
    m: usize,
    data: Vec<f64>,
}

impl TriangularFactor {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        let mut r = Self::zeros(m);
        for i in 0..m {
            r.data[i + i * m] = 1.0;
        }
        r
    }

    /// Wraps column-major values, rejecting nonzero entries below the diagonal.
    pub fn from_upper(m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {m}x{m} factor",
                data.len()
            )));
        }
        for j in 0..m {
            if data[j * m + j + 1..(j + 1) * m].iter().any(|&x| x != 0.0) {
                return Err(Error::Layout(format!("column {j} is not upper triangular")));
            }
        }
        Ok(Self { m, data })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mat(&self) -> MatRef<'_> {
        MatRef::new(&self.data, self.m, self.m, self.m).expect("square buffer")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `R^T R`, column-major.
    pub fn gram(&self) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..=j {
                let s = dot(&self.data[i * m..i * m + i + 1], &self.data[j * m..j * m + i + 1]);
                g[i + j * m] = s;
                g[j + i * m] = s;
            }
        }
        g
    }

    pub fn to_padded(&self) -> PaddedMatrix {
        self.as_mat().to_padded()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockParams {
    /// Rows per block.
    pub n_b: usize,
    /// Shift that keeps the reflector scaling away from zero.
    pub eps_fp: f64,
}

impl BlockParams {
    /// Block size for `m` columns within [`L2_BUDGET_BYTES`].
    pub fn for_columns(m: usize) -> Self {
        Self::with_budget(m, L2_BUDGET_BYTES)
    }

    /// Largest multiple of 8 with `(n_b + m) * m * 8 <= budget`, clamped to
    /// `[16, 4096]`.
    pub fn with_budget(m: usize, budget_bytes: usize) -> Self {
        let m = m.max(1);
        let fit = (budget_bytes / (8 * m)).saturating_sub(m);
        let n_b = (fit / 8 * 8).clamp(16, 4096);
        Self::with_block_rows(n_b)
    }

    pub fn with_block_rows(n_b: usize) -> Self {
        Self {
            n_b: n_b.max(1),
            eps_fp: f64::MIN_POSITIVE,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TsqrStats {
    pub counters: Counters,
    /// Peak auxiliary memory held by the reduction, excluding the input.
    pub aux_bytes: usize,
    pub blocks: usize,
    pub workers: usize,
}

/// Householder workspace for one worker.
///
/// Holds the stacked `(n_b + m) x m` block and the reflectors of the current
/// call; both are reused across blocks.
struct Reducer {
    m: usize,
    w: Vec<f64>,
    refl: Vec<f64>,
    flops: u64,
}

impl Reducer {
    fn new(m: usize, nb_max: usize) -> Self {
        Self {
            m,
            w: vec![0.0; (nb_max + m) * m],
            refl: vec![0.0; (nb_max + 1) * m],
            flops: 0,
        }
    }

    fn bytes(&self) -> usize {
        8 * (self.w.len() + self.refl.len())
    }

    /// Folds rows `r0..r1` of `x` into `r`.
    fn reduce(&mut self, x: MatRef<'_>, r0: usize, r1: usize, r: &mut TriangularFactor, eps: f64) {
        let m = self.m;
        let nb = r1 - r0;
        let ld = nb + m;
        if self.w.len() < ld * m {
            self.w.resize(ld * m, 0.0);
            self.refl.resize((nb + 1) * m, 0.0);
        }
        for j in 0..m {
            let c = &mut self.w[j * ld..(j + 1) * ld];
            c[..nb].copy_from_slice(&x.col(j)[r0..r1]);
            c[nb..].copy_from_slice(&r.data[j * m..(j + 1) * m]);
        }
        self.panel(0, m, nb, eps);
        for j in 0..m {
            r.data[j * m..(j + 1) * m].copy_from_slice(&self.w[j * ld + nb..(j + 1) * ld]);
        }
    }

    fn panel(&mut self, lo: usize, hi: usize, nb: usize, eps: f64) {
        if hi - lo <= PANEL_WIDTH {
            for j in lo..hi {
                self.reflector(j, nb, eps);
                self.apply(j, j + 1, hi, nb);
            }
        } else {
            let mid = lo + (hi - lo).div_ceil(2 * PANEL_WIDTH) * PANEL_WIDTH;
            self.panel(lo, mid, nb, eps);
            for j in lo..mid {
                self.apply(j, mid, hi, nb);
            }
            self.panel(mid, hi, nb, eps);
        }
    }

    /// Builds reflector `j` from rows `j..=nb+j` of column `j`, then moves the
    /// finished part of column `j` into the triangular rows.
    fn reflector(&mut self, j: usize, nb: usize, eps: f64) {
        let ld = nb + self.m;
        let col = &mut self.w[j * ld..(j + 1) * ld];
        let u = &col[j..=nb + j];
        let t = dot(u, u) + eps;
        let mut alpha = (t + eps).sqrt();
        let u1 = u[0];
        if u1 > 0.0 {
            alpha = -alpha;
        }
        let t = t - alpha * u1;
        let beta = 1.0 / t.sqrt();
        let v = &mut self.refl[j * (nb + 1)..(j + 1) * (nb + 1)];
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi = beta * ui;
        }
        v[0] = beta * (u1 - alpha);
        self.flops += 3 * (nb as u64 + 1);

        #[cfg(debug_assertions)]
        {
            let n2 = dot(u, u);
            if (1e-300..1e300).contains(&n2) {
                let vv = dot(v, v);
                debug_assert!((vv - 2.0).abs() <= 1e-12, "reflector norm^2 = {vv}");
            }
        }

        for i in (0..j).rev() {
            col[nb + i] = col[i];
        }
        col[nb + j] = alpha;
    }

    /// Applies reflector `j` to columns `k0..k1`, four at a time.
    fn apply(&mut self, j: usize, k0: usize, k1: usize, nb: usize) {
        if k0 >= k1 {
            return;
        }
        let ld = nb + self.m;
        let len = nb + 1;
        let v = &self.refl[j * len..(j + 1) * len];
        let mut cols = self.w[k0 * ld..k1 * ld].chunks_exact_mut(ld);
        while cols.len() >= 4 {
            let [c0, c1, c2, c3] = std::array::from_fn(|_| cols.next().expect("four columns"));
            let (c0, c1, c2, c3) = (&mut c0[j..j + len], &mut c1[j..j + len], &mut c2[j..j + len], &mut c3[j..j + len]);
            let g = dot4(v, [c0, c1, c2, c3]);
            axpy4([-g[0], -g[1], -g[2], -g[3]], v, [c0, c1, c2, c3]);
        }
        for c in cols {
            let c = &mut c[j..j + len];
            let g = dot(v, c);
            axpy(-g, v, c);
        }
        self.flops += 4 * (len * (k1 - k0)) as u64;
    }
}

/// Folds an `n_b x m` block into the triangular factor `r`.
///
/// Returns `R'` with `R'^T R' = M^T M + R^T R`. Neither input is modified.
pub fn reduce_block(
    block: MatRef<'_>,
    r: &TriangularFactor,
    params: &BlockParams,
) -> Result<TriangularFactor> {
    reduce_block_counted(block, r, params).map(|(r, _)| r)
}

/// [`reduce_block`] plus the executed flop count.
pub fn reduce_block_counted(
    block: MatRef<'_>,
    r: &TriangularFactor,
    params: &BlockParams,
) -> Result<(TriangularFactor, u64)> {
    if block.cols() != r.order() {
        return Err(Error::DimensionMismatch(format!(
            "block has {} columns, factor has order {}",
            block.cols(),
            r.order()
        )));
    }
    let mut out = r.clone();
    if block.rows() == 0 || r.order() == 0 {
        return Ok((out, 0));
    }
    let mut red = Reducer::new(r.order(), block.rows());
    red.reduce(block, 0, block.rows(), &mut out, params.eps_fp);
    Ok((out, red.flops))
}

/// Folds factors left to right: `parts[0]` absorbs `parts[1]`, then `parts[2]`...
pub fn combine_factors(parts: &[TriangularFactor], params: &BlockParams) -> Result<TriangularFactor> {
    combine_counted(parts, params).map(|(r, _)| r)
}

pub(crate) fn combine_counted(parts: &[TriangularFactor], params: &BlockParams) -> Result<(TriangularFactor, u64)> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Dimension("no factors to combine".into()))?;
    let m = first.order();
    if let Some(p) = parts.iter().find(|p| p.order() != m) {
        return Err(Error::DimensionMismatch(format!(
            "factor orders {m} and {} differ",
            p.order()
        )));
    }
    let mut acc = first.clone();
    let mut red = Reducer::new(m, m);
    for p in &parts[1..] {
        red.reduce(p.as_mat(), 0, m, &mut acc, params.eps_fp);
    }
    Ok((acc, red.flops))
}

/// Triangular factor of a tall-skinny `n x m` matrix, `n >= m`.
pub fn tsqr(x: MatRef<'_>, params: &BlockParams, workers: usize) -> Result<TriangularFactor> {
    tsqr_with_stats(x, params, workers).map(|(r, _)| r)
}

pub fn tsqr_with_stats(
    x: MatRef<'_>,
    params: &BlockParams,
    workers: usize,
) -> Result<(TriangularFactor, TsqrStats)> {
    let (n, m) = (x.rows(), x.cols());
    if m == 0 || n < m {
        return Err(Error::Dimension(format!(
            "TSQR needs a tall matrix, got {n}x{m}"
        )));
    }
    Ok(reduce_rows(x, params, workers))
}

/// Factor `R` (`m x m`) with `R^T R = X^T X` for any row count.
pub(crate) fn gram_factor(x: MatRef<'_>, params: &BlockParams, workers: usize) -> (TriangularFactor, TsqrStats) {
    if x.rows() >= x.cols() {
        reduce_rows(x, params, workers)
    } else {
        let r = TriangularFactor::zeros(x.cols());
        let (r, flops) = reduce_block_counted(x, &r, params).expect("matching columns");
        let m = x.cols();
        let stats = TsqrStats {
            counters: Counters::new(flops, 8 * (x.rows() * m) as u64),
            aux_bytes: 8 * ((x.rows() + m) * m + (x.rows() + 1) * m + m * m),
            blocks: 1,
            workers: 1,
        };
        (r, stats)
    }
}

fn reduce_rows(x: MatRef<'_>, params: &BlockParams, workers: usize) -> (TriangularFactor, TsqrStats) {
    let (n, m) = (x.rows(), x.cols());
    let nb = params.n_b.max(1);
    let blocks = n.div_ceil(nb);
    let per = blocks.div_ceil(workers.clamp(1, blocks.max(1)));
    let used = blocks.div_ceil(per);
    let eps = params.eps_fp;

    let parts: Vec<(TriangularFactor, u64, usize)> = (0..used)
        .into_par_iter()
        .map(|t| {
            let mut red = Reducer::new(m, nb);
            let mut r = TriangularFactor::zeros(m);
            for b in t * per..((t + 1) * per).min(blocks) {
                let r0 = b * nb;
                red.reduce(x, r0, (r0 + nb).min(n), &mut r, eps);
            }
            let bytes = red.bytes() + 8 * m * m;
            (r, red.flops, bytes)
        })
        .collect();

    let mut flops: u64 = parts.iter().map(|p| p.1).sum();
    let mut aux: usize = parts.iter().map(|p| p.2).sum();
    let factors: Vec<TriangularFactor> = parts.into_iter().map(|p| p.0).collect();
    let r = if factors.len() == 1 {
        factors.into_iter().next().expect("one factor")
    } else {
        let (r, f) = combine_counted(&factors, params).expect("equal orders");
        flops += f;
        aux += 8 * (2 * m * m + (m + 1) * m);
        r
    };
    let stats = TsqrStats {
        counters: Counters::new(flops, 8 * (n * m) as u64),
        aux_bytes: aux,
        blocks,
        workers: used,
    };
    (r, stats)
}
