use std::time::Instant;

use rayon::prelude::*;

use super::{core_from_cols, core_from_vt, ExecConfig, Phase, RunLog, Side, StepRecord, TTCore, TensorTrain, TruncationSpec};
use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::small::{derive_delta, small_svd, truncation_rank, SmallSvd};
use crate::tensor::{DenseTensor, MatRef, PaddedMatrix};
use crate::tsmm::tsmm_reshape_counted;
use crate::tsqr::{combine_counted, gram_factor, TriangularFactor};

pub(crate) enum Work<'a> {
    View(MatRef<'a>),
    Owned(PaddedMatrix),
}

impl Work<'_> {
    pub(crate) fn mat(&self) -> MatRef<'_> {
        match self {
            Work::View(m) => *m,
            Work::Owned(m) => m.as_ref(),
        }
    }
}

pub(crate) struct SweepOut {
    /// Per partition, cores in production order (rightmost first).
    pub cores: Vec<Vec<TTCore>>,
    /// Per partition, the final `local rows x rank` work matrix.
    pub last: Vec<PaddedMatrix>,
    pub rank: usize,
}

/// Result of the QR and SVD part of one step, shared by all partitions.
pub(crate) struct Factored {
    pub svds: Vec<SmallSvd>,
    pub rank: usize,
    pub delta: f64,
}

/// Triangular factor of the row-stacked partitions, then one small SVD per
/// partition and the truncation rank.
pub(crate) fn factor_step(
    parts: &[Work<'_>],
    cols: usize,
    cap: usize,
    spec: &TruncationSpec,
    order: usize,
    cfg: &ExecConfig,
    rec: &mut StepRecord,
) -> Result<Factored> {
    let params = cfg.block_params(cols);
    let t = Instant::now();
    let locals: Vec<_> = parts
        .par_iter()
        .map(|w| gram_factor(w.mat(), &params, cfg.workers))
        .collect();
    let mut c: Counters = locals.iter().map(|l| l.1.counters).sum();
    let mut factors: Vec<TriangularFactor> = locals.into_iter().map(|l| l.0).collect();
    let global = if factors.len() == 1 {
        factors.pop().expect("one factor")
    } else {
        let (r, f) = combine_counted(&factors, &params)?;
        c.flops += f;
        r
    };
    rec.add(Phase::Tsqr, t, c);

    let t = Instant::now();
    let svds: Vec<SmallSvd> = (0..parts.len())
        .into_par_iter()
        .map(|_| small_svd(&global))
        .collect::<Result<_>>()?;
    let delta = match spec.delta {
        Some(delta) => delta,
        None => {
            let norm = svds[0].sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
            derive_delta(norm, spec.eps, order)?
        }
    };
    let ranks: Vec<usize> = svds
        .iter()
        .map(|s| truncation_rank(&s.sigma, delta, spec.r_max, cap))
        .collect();
    if ranks.iter().any(|&r| r != ranks[0]) {
        return Err(Error::PartitionMismatch(format!("partitions chose ranks {ranks:?}")));
    }
    rec.add(Phase::Svd, t, Counters::default());
    rec.set_rank(ranks[0]);
    Ok(Factored {
        svds,
        rank: ranks[0],
        delta,
    })
}

/// Right-to-left sweep over a work tensor of global dims `dims` with trailing
/// rank `r_right`, split row-wise into `parts`. Produces cores `e..2` where
/// `e = dims.len()`; core `i` is logged as `i + core_offset`. `order` is the
/// tensor order used to derive the threshold.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep(
    parts: Vec<Work<'_>>,
    dims: &[usize],
    r_right: usize,
    spec: &TruncationSpec,
    order: usize,
    core_offset: usize,
    cfg: &ExecConfig,
    log: &mut RunLog,
) -> Result<SweepOut> {
    let e = dims.len();
    assert!(e >= 2, "a sweep needs at least two dimensions");
    let n_parts = parts.len();
    let mut spec = *spec;
    let mut parts = parts;
    let mut r_r = r_right;
    let mut cores: Vec<Vec<TTCore>> = vec![Vec::with_capacity(e); n_parts];
    for i in (2..=e).rev() {
        let n = dims[i - 1];
        let cols = n * r_r;
        let rows: usize = dims[..i - 1].iter().product();
        let local_rows = rows / n_parts;
        let mut rec = StepRecord::new(i + core_offset, Side::Right, rows, cols);
        let f = factor_step(&parts, cols, rows.min(cols), &spec, order, cfg, &mut rec)?;
        let r = f.rank;
        spec = spec.with_delta(f.delta);
        log.delta = f.delta;
        for (k, s) in f.svds.iter().enumerate() {
            cores[k].push(core_from_vt(&s.v, cols, r, n, r_r));
        }

        let t = Instant::now();
        let (out_rows, out_cols) = if i > 2 {
            (local_rows / dims[i - 2], dims[i - 2] * r)
        } else {
            (local_rows, r)
        };
        let next: Vec<(PaddedMatrix, Counters)> = parts
            .par_iter()
            .zip(&f.svds)
            .map(|(w, s)| {
                let mut c = Counters::default();
                let y = tsmm_reshape_counted(w.mat(), s.v_leading(r), out_rows, out_cols, &mut c)?;
                Ok((y, c))
            })
            .collect::<Result<_>>()?;
        rec.add(Phase::Tsmm, t, next.iter().map(|p| p.1).sum());
        parts = next.into_iter().map(|p| Work::Owned(p.0)).collect();
        r_r = r;
        log.steps.push(rec);
    }
    let last = parts
        .into_iter()
        .map(|w| match w {
            Work::Owned(m) => m,
            Work::View(m) => m.to_padded(),
        })
        .collect();
    Ok(SweepOut {
        cores,
        last,
        rank: r_r,
    })
}

/// TT-SVD with Q-less TSQR and fused TSMM steps.
pub fn tt_svd_tsqr(x: &DenseTensor, spec: &TruncationSpec) -> Result<TensorTrain> {
    tt_svd_tsqr_with(x, spec, &ExecConfig::default(), &mut RunLog::default())
}

pub fn tt_svd_tsqr_with(
    x: &DenseTensor,
    spec: &TruncationSpec,
    cfg: &ExecConfig,
    log: &mut RunLog,
) -> Result<TensorTrain> {
    let d = x.ndim();
    if d < 2 {
        return Err(Error::DegenerateDimension(d));
    }
    let out = sweep(vec![Work::View(x.leading_matrix())], x.dims(), 1, spec, d, 0, cfg, log)?;
    let SweepOut { cores, last, rank, .. } = out;
    let first = core_from_cols(last[0].to_col_major(), 1, x.dims()[0], rank);
    let mut all = vec![first];
    all.extend(cores.into_iter().next().expect("one partition").into_iter().rev());
    TensorTrain::new(all)
}

/// Output of the partitioned sweep.
#[derive(Clone, Debug)]
pub struct DistributedTt {
    /// Train of the stacked tensor `(P, n_1, ..., n_d)`.
    pub tt: TensorTrain,
    /// Cores `2..=d+1` as computed independently by each partition.
    pub partition_cores: Vec<Vec<TTCore>>,
}

/// TT-SVD of the tensor whose leading-index slices are `parts`.
///
/// Partitions only exchange triangular factors; every partition computes the
/// small SVDs and the shared cores on its own.
pub fn tt_svd_distributed(parts: &[DenseTensor], spec: &TruncationSpec) -> Result<DistributedTt> {
    tt_svd_distributed_with(parts, spec, &ExecConfig::default(), &mut RunLog::default())
}

pub fn tt_svd_distributed_with(
    parts: &[DenseTensor],
    spec: &TruncationSpec,
    cfg: &ExecConfig,
    log: &mut RunLog,
) -> Result<DistributedTt> {
    let first = parts
        .first()
        .ok_or_else(|| Error::PartitionMismatch("no partitions".into()))?;
    if let Some(p) = parts.iter().find(|p| p.shape() != first.shape()) {
        return Err(Error::PartitionMismatch(format!(
            "slab shapes {} and {} differ",
            first.shape(),
            p.shape()
        )));
    }
    let n_parts = parts.len();
    let mut dims = vec![n_parts];
    dims.extend_from_slice(first.dims());
    let works = parts
        .iter()
        .map(|p| {
            if p.ndim() == 1 {
                MatRef::new(p.data(), 1, p.dims()[0], 1).map(Work::View)
            } else {
                Ok(Work::View(p.leading_matrix()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let out = sweep(works, &dims, 1, spec, dims.len(), 0, cfg, log)?;
    let r = out.rank;
    let mut lead = vec![0.0; n_parts * r];
    for (k, w) in out.last.iter().enumerate() {
        for c in 0..r {
            lead[k + n_parts * c] = w.get(0, c);
        }
    }
    let partition_cores: Vec<Vec<TTCore>> = out
        .cores
        .into_iter()
        .map(|c| c.into_iter().rev().collect())
        .collect();
    let mut all = vec![TTCore::new(1, n_parts, r, lead)?];
    all.extend(partition_cores[0].iter().cloned());
    Ok(DistributedTt {
        tt: TensorTrain::new(all)?,
        partition_cores,
    })
}
