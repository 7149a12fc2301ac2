use super::{core_from_cols, core_from_vt, TTCore, TensorTrain, TruncationSpec};
use crate::error::Result;
use crate::small::{derive_delta, jacobi_svd, truncation_rank};
use crate::tensor::{DenseTensor, MatRef};

/// Classic TT-SVD: every step runs a Jacobi SVD of the full work matrix.
pub fn tt_svd_reference(x: &DenseTensor, spec: &TruncationSpec) -> Result<TensorTrain> {
    let dims = x.dims();
    let d = dims.len();
    let delta = match spec.delta {
        Some(delta) => delta,
        None => derive_delta(x.frobenius_norm(), spec.eps, d)?,
    };
    let mut w = x.to_col_major();
    let mut r_right = 1;
    let mut right: Vec<TTCore> = Vec::with_capacity(d);
    for i in (2..=d).rev() {
        let n = dims[i - 1];
        let cols = n * r_right;
        let rows = w.len() / cols;
        let svd = jacobi_svd(MatRef::new(&w, rows, cols, rows)?)?;
        let r = truncation_rank(&svd.sigma, delta, spec.r_max, rows.min(cols));
        right.push(core_from_vt(&svd.v, cols, r, n, r_right));
        w = svd.us[..rows * r].to_vec();
        r_right = r;
    }
    let mut cores = vec![core_from_cols(w, 1, dims[0], r_right)];
    cores.extend(right.into_iter().rev());
    TensorTrain::new(cores)
}
