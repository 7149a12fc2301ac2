use std::time::Instant;

use super::sweep::{sweep, tt_svd_tsqr_with, Work};
use super::{core_from_cols, ExecConfig, Phase, RunLog, Side, StepRecord, TTCore, TensorTrain, ThickBoundsParams, TruncationSpec};
use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::kernels::matmul;
use crate::small::derive_delta;
use crate::tensor::{DenseTensor, MatRef, PaddedMatrix};
use crate::tsmm::tsmm_reshape_counted;
use crate::tsqr::tsqr_with_stats;

/// Smallest `k` such that the trailing `k` dims multiply to at least
/// `max(m_min, r_tilde / f1_min)`, or `d - 1` if none does.
pub fn choose_combined_dims(dims: &[usize], r_tilde: usize, params: &ThickBoundsParams) -> usize {
    let d = dims.len();
    if d < 2 {
        return 1;
    }
    let need = (params.m_min as f64).max(r_tilde as f64 / params.f1_min);
    let mut m = 1.0;
    for k in 1..d {
        m *= dims[d - k] as f64;
        if m >= need {
            return k;
        }
    }
    d - 1
}

/// First step over the combined trailing dims.
pub(crate) struct Boundary<'a> {
    /// `X` as `(n_1 ... n_{d-k}) x m`.
    pub w0: MatRef<'a>,
    pub split: usize,
    /// Cores `split+1..=d`, left to right.
    pub cores: Vec<TTCore>,
    /// Right interface of `cores`, `m x rank`, column-major.
    pub basis: Vec<f64>,
    pub rank: usize,
    pub delta: f64,
    pub record: StepRecord,
}

impl Boundary<'_> {
    pub fn basis(&self) -> MatRef<'_> {
        MatRef::new(&self.basis, self.w0.cols(), self.rank, self.w0.cols()).expect("basis buffer")
    }
}

/// Reduces `X` viewed as `(n̄/m) x m` to its triangular factor `R` and runs
/// the sweep on `R` seen as a `(m, n_{d-k+1}, ..., n_d)` tensor. `R` has the
/// same Gram matrix as the matricization, so this yields the same trailing
/// cores as peeling them one by one from `X`.
pub(crate) fn boundary<'a>(
    x: &'a DenseTensor,
    k: usize,
    spec: &TruncationSpec,
    cfg: &ExecConfig,
) -> Result<Boundary<'a>> {
    let dims = x.dims();
    let d = dims.len();
    let split = d - k;
    let w0 = x.matricize(split)?;
    let (rows, m) = (w0.rows(), w0.cols());
    let mut rec = StepRecord::new(split + 1, Side::Boundary, rows, m);

    let t = Instant::now();
    let (z, c) = if rows >= m {
        let (r, st) = tsqr_with_stats(w0, &cfg.block_params(m), cfg.workers)?;
        (r.as_slice().to_vec(), st.counters)
    } else {
        (w0.to_col_major(), Counters::new(0, 8 * (rows * m) as u64))
    };
    rec.add(Phase::Tsqr, t, c);

    let t = Instant::now();
    let q = z.len() / m;
    let delta = match spec.delta {
        Some(delta) => delta,
        None => derive_delta(z.iter().map(|v| v * v).sum::<f64>().sqrt(), spec.eps, d)?,
    };
    let mut inner_dims = vec![q];
    inner_dims.extend_from_slice(&dims[split..]);
    let n_d = dims[d - 1];
    let zt = PaddedMatrix::from_col_major(q * m / n_d, n_d, &z)?;
    let mut inner_log = RunLog::default();
    let out = sweep(
        vec![Work::Owned(zt)],
        &inner_dims,
        1,
        &spec.with_delta(delta),
        d,
        split - 1,
        cfg,
        &mut inner_log,
    )?;
    let rank = out.rank;
    let cores: Vec<TTCore> = out.cores.into_iter().next().expect("one partition").into_iter().rev().collect();
    let basis = right_interface(&cores);
    rec.add(Phase::Svd, t, inner_log.counters());
    rec.set_rank(rank);
    Ok(Boundary {
        w0,
        split,
        cores,
        basis,
        rank,
        delta,
        record: rec,
    })
}

/// Contracts cores `(r_0, n_1, r_1) ... (r_{k-1}, n_k, 1)` into the
/// `(n_1 ... n_k) x r_0` matrix `B` with `B^T` their unfolding.
fn right_interface(cores: &[TTCore]) -> Vec<f64> {
    let last = cores.last().expect("at least one core");
    let mut z = last.data().to_vec();
    let mut cols = last.n();
    for c in cores[..cores.len() - 1].iter().rev() {
        z = matmul(c.data(), c.r_left() * c.n(), c.r_right(), &z, cols);
        cols *= c.n();
    }
    let r = cores[0].r_left();
    let mut b = vec![0.0; cols * r];
    for a in 0..r {
        for j in 0..cols {
            b[j + cols * a] = z[a + r * j];
        }
    }
    b
}

/// TT-SVD whose first step combines trailing dims to raise the compute
/// intensity and shrink the work matrix early.
pub fn tt_svd_thick_bounds(
    x: &DenseTensor,
    spec: &TruncationSpec,
    params: &ThickBoundsParams,
) -> Result<TensorTrain> {
    tt_svd_thick_bounds_with(x, spec, params, &ExecConfig::default(), &mut RunLog::default())
}

pub fn tt_svd_thick_bounds_with(
    x: &DenseTensor,
    spec: &TruncationSpec,
    params: &ThickBoundsParams,
    cfg: &ExecConfig,
    log: &mut RunLog,
) -> Result<TensorTrain> {
    let dims = x.dims();
    let d = dims.len();
    if d < 2 {
        return Err(Error::DegenerateDimension(d));
    }
    let k = choose_combined_dims(dims, params.r_tilde.unwrap_or(spec.r_max), params);
    if k <= 1 {
        return tt_svd_tsqr_with(x, spec, cfg, log);
    }
    let b = boundary(x, k, spec, cfg)?;
    let (split, r, rows) = (b.split, b.rank, b.w0.rows());
    log.delta = b.delta;

    let t = Instant::now();
    let mut c = Counters::default();
    let (out_rows, out_cols) = if split >= 2 {
        (rows / dims[split - 1], dims[split - 1] * r)
    } else {
        (rows, r)
    };
    let w1 = tsmm_reshape_counted(b.w0, b.basis(), out_rows, out_cols, &mut c)?;
    let mut rec = b.record;
    rec.add(Phase::Tsmm, t, c);
    log.steps.push(rec);

    let mut all = if split >= 2 {
        let out = sweep(
            vec![Work::Owned(w1)],
            &dims[..split],
            r,
            &spec.with_delta(b.delta),
            d,
            0,
            cfg,
            log,
        )?;
        let mut head = vec![core_from_cols(out.last[0].to_col_major(), 1, dims[0], out.rank)];
        head.extend(out.cores.into_iter().next().expect("one partition").into_iter().rev());
        head
    } else {
        vec![core_from_cols(w1.to_col_major(), 1, dims[0], r)]
    };
    all.extend(b.cores);
    TensorTrain::new(all)
}
