//! Tall-skinny matrix products fused with the reshape of the next step.

use rayon::prelude::*;

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::kernels::{axpy, SyncPtr};
use crate::tensor::{MatRef, PaddedMatrix};

const ROW_BLOCK: usize = 512;
const TILE: usize = 32;

/// `reshape(X V, (out_rows, out_cols))` in column-major order, written into a
/// freshly padded matrix in one pass over `X`.
pub fn tsmm_reshape(
    x: MatRef<'_>,
    v: MatRef<'_>,
    out_rows: usize,
    out_cols: usize,
) -> Result<PaddedMatrix> {
    let mut c = Counters::default();
    tsmm_reshape_counted(x, v, out_rows, out_cols, &mut c)
}

pub fn tsmm_reshape_counted(
    x: MatRef<'_>,
    v: MatRef<'_>,
    out_rows: usize,
    out_cols: usize,
    counters: &mut Counters,
) -> Result<PaddedMatrix> {
    let (n, m, k) = (x.rows(), x.cols(), v.cols());
    if v.rows() != m {
        return Err(Error::DimensionMismatch(format!(
            "X is {n}x{m} but V is {}x{k}",
            v.rows()
        )));
    }
    if out_rows * out_cols != n * k || (out_rows == 0 && n * k > 0) {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape {n}x{k} into {out_rows}x{out_cols}"
        )));
    }
    let mut out = PaddedMatrix::zeros(out_rows, out_cols);
    if n * k == 0 {
        return Ok(out);
    }
    let stride = out.stride();
    let ptr = SyncPtr::new(out.data_mut().as_mut_ptr());
    let blocks = n.div_ceil(ROW_BLOCK);
    (0..blocks).into_par_iter().for_each_init(
        || vec![0.0; ROW_BLOCK * k],
        |tmp, b| {
            let r0 = b * ROW_BLOCK;
            let r1 = (r0 + ROW_BLOCK).min(n);
            let len = r1 - r0;
            for c in 0..k {
                let t = &mut tmp[c * len..(c + 1) * len];
                t.fill(0.0);
                for j in 0..m {
                    axpy(v.get(j, c), &x.col(j)[r0..r1], t);
                }
            }
            for c in 0..k {
                let mut f = r0 + n * c;
                let end = r1 + n * c;
                let mut src = c * len;
                while f < end {
                    let (orow, ocol) = (f % out_rows, f / out_rows);
                    let seg = (end - f).min(out_rows - orow);
                    // SAFETY: the flat index f maps injectively to
                    // ocol * stride + orow < stride * out_cols, and each f is
                    // produced by exactly one block.
                    unsafe {
                        std::ptr::copy_nonoverlapping(
                            tmp[src..src + seg].as_ptr(),
                            ptr.get().add(ocol * stride + orow),
                            seg,
                        );
                    }
                    f += seg;
                    src += seg;
                }
            }
        },
    );
    *counters += Counters::new(2 * (n * m * k) as u64, 8 * (n * (m + k)) as u64);
    Ok(out)
}

/// `reshape(W^T, (out_rows, p q / out_rows))` for a `p x q` matrix `W`.
pub fn transpose_reorder(w: MatRef<'_>, out_rows: usize) -> Result<PaddedMatrix> {
    let mut c = Counters::default();
    transpose_reorder_counted(w, out_rows, &mut c)
}

pub fn transpose_reorder_counted(
    w: MatRef<'_>,
    out_rows: usize,
    counters: &mut Counters,
) -> Result<PaddedMatrix> {
    let (p, q) = (w.rows(), w.cols());
    let total = p * q;
    if out_rows == 0 || total % out_rows != 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape {q}x{p} into {out_rows} rows"
        )));
    }
    let out_cols = total / out_rows;
    let mut out = PaddedMatrix::zeros(out_rows, out_cols);
    let stride = out.stride();
    let ptr = SyncPtr::new(out.data_mut().as_mut_ptr());
    (0..p.div_ceil(TILE)).into_par_iter().for_each(|ti| {
        let i0 = ti * TILE;
        let i1 = (i0 + TILE).min(p);
        for j0 in (0..q).step_by(TILE) {
            let j1 = (j0 + TILE).min(q);
            for i in i0..i1 {
                for j in j0..j1 {
                    let f = j + q * i;
                    // SAFETY: (i, j) -> f is a bijection onto 0..p*q and every
                    // (i, j) belongs to exactly one tile.
                    unsafe {
                        *ptr.get().add((f / out_rows) * stride + f % out_rows) = w.get(i, j);
                    }
                }
            }
        }
    });
    *counters += Counters::new(0, 16 * total as u64);
    Ok(out)
}
