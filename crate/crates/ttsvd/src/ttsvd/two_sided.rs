use std::time::Instant;

use super::sweep::{factor_step, Work};
use super::thick::{boundary, choose_combined_dims};
use super::{core_from_cols, core_from_vt, ExecConfig, Phase, RunLog, Side, StepRecord, TTCore, TensorTrain, ThickBoundsParams, TruncationSpec};
use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, PaddedMatrix};
use crate::tsmm::{transpose_reorder_counted, tsmm_reshape_counted};

/// Which unfolding the work matrix currently holds.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Layout {
    /// `(r_l n_lo ... n_{hi-1}) x (n_hi r_r)`
    Right,
    /// `(n_{lo+1} ... n_hi r_r) x (r_l n_lo)`
    Left,
}

/// TT-SVD that alternates between peeling the rightmost and the leftmost
/// remaining core, so both boundary ranks shrink early.
pub fn tt_svd_two_sided(
    x: &DenseTensor,
    spec: &TruncationSpec,
    params: &ThickBoundsParams,
) -> Result<TensorTrain> {
    tt_svd_two_sided_with(x, spec, params, &ExecConfig::default(), &mut RunLog::default())
}

pub fn tt_svd_two_sided_with(
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
    let mut spec = *spec;
    let mut left: Vec<TTCore> = Vec::new();
    let mut right: Vec<TTCore> = Vec::new();
    let mut middle: Option<TTCore> = None;
    let (mut lo, mut hi) = (1usize, d);
    let (mut r_l, mut r_r) = (1usize, 1usize);

    let (mut w, mut layout) = if k > 1 {
        let b = boundary(x, k, &spec, cfg)?;
        spec = spec.with_delta(b.delta);
        log.delta = b.delta;
        hi = b.split;
        r_r = b.rank;
        let rows = b.w0.rows();
        let mut rec = b.record.clone();
        let t = Instant::now();
        let mut c = Counters::default();
        let next = if hi > lo {
            let rest = rows * r_r / dims[0];
            let y = tsmm_reshape_counted(b.w0, b.basis(), dims[0], rest, &mut c)?;
            rec.add(Phase::Tsmm, t, c);
            let t = Instant::now();
            let mut c = Counters::default();
            let w = transpose_reorder_counted(y.as_ref(), rest, &mut c)?;
            rec.add(Phase::Reorder, t, c);
            Some(w)
        } else {
            let y = tsmm_reshape_counted(b.w0, b.basis(), rows, r_r, &mut c)?;
            rec.add(Phase::Tsmm, t, c);
            middle = Some(core_from_cols(y.to_col_major(), 1, dims[0], r_r));
            None
        };
        right.extend(b.cores.into_iter().rev());
        log.steps.push(rec);
        match next {
            Some(w) => (Work::Owned(w), Layout::Left),
            None => (Work::Owned(PaddedMatrix::zeros(0, 0)), Layout::Left),
        }
    } else {
        (Work::View(x.leading_matrix()), Layout::Right)
    };

    while hi > lo {
        let rows = w.mat().rows();
        let (cols, side, core_idx) = match layout {
            Layout::Right => (dims[hi - 1] * r_r, Side::Right, hi),
            Layout::Left => (r_l * dims[lo - 1], Side::Left, lo),
        };
        let mut rec = StepRecord::new(core_idx, side, rows, cols);
        let parts = [w];
        let f = factor_step(&parts, cols, rows.min(cols), &spec, d, cfg, &mut rec)?;
        let [w_cur] = parts;
        spec = spec.with_delta(f.delta);
        log.delta = f.delta;
        let r = f.rank;
        let svd = &f.svds[0];
        let vr = svd.v_leading(r);

        let mut tsmm_c = Counters::default();
        let mut reorder_c = Counters::default();
        let t = Instant::now();
        let mut t_reorder = None;
        match layout {
            Layout::Right => {
                let n = dims[hi - 1];
                right.push(core_from_vt(&svd.v, cols, r, n, r_r));
                hi -= 1;
                r_r = r;
                if hi > lo {
                    let a = r_l * dims[lo - 1];
                    let rest = rows * r / a;
                    let y = tsmm_reshape_counted(w_cur.mat(), vr, a, rest, &mut tsmm_c)?;
                    rec.add(Phase::Tsmm, t, tsmm_c);
                    let t2 = Instant::now();
                    w = Work::Owned(transpose_reorder_counted(y.as_ref(), rest, &mut reorder_c)?);
                    t_reorder = Some(t2);
                    layout = Layout::Left;
                } else {
                    let y = tsmm_reshape_counted(w_cur.mat(), vr, rows, r, &mut tsmm_c)?;
                    rec.add(Phase::Tsmm, t, tsmm_c);
                    middle = Some(core_from_cols(y.to_col_major(), r_l, dims[lo - 1], r_r));
                    w = w_cur;
                }
            }
            Layout::Left => {
                let n = dims[lo - 1];
                left.push(core_from_cols(svd.v[..cols * r].to_vec(), r_l, n, r));
                lo += 1;
                r_l = r;
                let y = tsmm_reshape_counted(w_cur.mat(), vr, rows, r, &mut tsmm_c)?;
                rec.add(Phase::Tsmm, t, tsmm_c);
                let t2 = Instant::now();
                if hi > lo {
                    let out_rows = rows * r / (dims[hi - 1] * r_r);
                    w = Work::Owned(transpose_reorder_counted(y.as_ref(), out_rows, &mut reorder_c)?);
                    layout = Layout::Right;
                } else {
                    let yt = transpose_reorder_counted(y.as_ref(), r, &mut reorder_c)?;
                    middle = Some(core_from_cols(yt.to_col_major(), r_l, dims[lo - 1], r_r));
                    w = Work::Owned(y);
                }
                t_reorder = Some(t2);
            }
        }
        if let Some(t2) = t_reorder {
            rec.add(Phase::Reorder, t2, reorder_c);
        }
        log.steps.push(rec);
    }

    let mut cores = left;
    cores.push(middle.expect("middle core"));
    cores.extend(right.into_iter().rev());
    TensorTrain::new(cores)
}
