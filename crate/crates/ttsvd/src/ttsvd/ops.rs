use super::TensorTrain;
use crate::error::{Error, Result};
use crate::kernels::{dot, matmul};
use crate::tensor::{check_budget, DenseTensor, Shape, DEFAULT_MEMORY_BUDGET};

/// Contracts all cores into a dense tensor.
pub fn tt_reconstruct(tt: &TensorTrain) -> Result<DenseTensor> {
    tt_reconstruct_in(tt, DEFAULT_MEMORY_BUDGET)
}

pub fn tt_reconstruct_in(tt: &TensorTrain, budget: usize) -> Result<DenseTensor> {
    let shape = Shape::new(tt.dims())?;
    let cores = tt.cores();
    let mut p = 1usize;
    for c in cores {
        p *= c.n();
        check_budget(p.saturating_mul(c.r_right()), budget)?;
    }
    let mut cur = cores[0].data().to_vec();
    let mut p = cores[0].n();
    for c in &cores[1..] {
        cur = matmul(&cur, p, c.r_left(), c.data(), c.n() * c.r_right());
        p *= c.n();
    }
    DenseTensor::from_col_major(shape, &cur)
}

/// `||X - X~||_F / ||X||_F`, or the absolute error when `X = 0`.
pub fn tt_error(x: &DenseTensor, tt: &TensorTrain) -> Result<f64> {
    if x.dims() != tt.dims().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "tensor shape {} vs train dims {:?}",
            x.shape(),
            tt.dims()
        )));
    }
    let y = tt_reconstruct(tt)?;
    let (a, b) = (x.leading_matrix(), y.leading_matrix());
    let mut diff = 0.0;
    for j in 0..a.cols() {
        diff += a
            .col(j)
            .iter()
            .zip(b.col(j))
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>();
    }
    let norm = x.frobenius_norm();
    let diff = diff.sqrt();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

/// Largest `||G^T G - I||_F` over all cores but `excluded` (0-based). Cores
/// left of it are checked as `(r_left n) x r_right` matrices, cores right of
/// it as `r_left x (n r_right)`.
pub fn check_orthonormality(tt: &TensorTrain, excluded: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, c) in tt.cores().iter().enumerate() {
        if j == excluded {
            continue;
        }
        let dev = if j < excluded {
            let (rows, cols) = (c.r_left() * c.n(), c.r_right());
            let g = c.data();
            let mut s = 0.0;
            for a in 0..cols {
                for b in 0..cols {
                    let v = dot(&g[a * rows..(a + 1) * rows], &g[b * rows..(b + 1) * rows]);
                    let e = v - if a == b { 1.0 } else { 0.0 };
                    s += e * e;
                }
            }
            s
        } else {
            let (rows, cols) = (c.r_left(), c.n() * c.r_right());
            let g = c.data();
            let mut s = 0.0;
            for a in 0..rows {
                for b in 0..rows {
                    let v: f64 = (0..cols).map(|t| g[a + rows * t] * g[b + rows * t]).sum();
                    let e = v - if a == b { 1.0 } else { 0.0 };
                    s += e * e;
                }
            }
            s
        };
        worst = worst.max(dev.sqrt());
    }
    worst
}
