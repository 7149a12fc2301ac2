//! Tensor-train decomposition of dense tensors built on a Q-less tall-skinny
//! QR, with software counters and a Roofline cost model.
//!
//! ```
//! use ttsvd::{random_tensor, tt_error, tt_svd_tsqr, Shape, TruncationSpec};
//!
//! let x = random_tensor(&Shape::new(vec![2; 10]).unwrap(), 7).unwrap();
//! let tt = tt_svd_tsqr(&x, &TruncationSpec::new(4, 0.0)).unwrap();
//! assert!(tt.ranks().iter().all(|&r| r <= 4));
//! assert!(tt_error(&x, &tt).unwrap() < 1.0);
//! ```

pub mod counters;
pub mod error;
pub mod io;
mod kernels;
pub mod perfmodel;
pub mod small;
pub mod tensor;
pub mod tsmm;
pub mod tsqr;
pub mod ttsvd;

pub use counters::Counters;
pub use error::{Error, Result};
pub use small::{derive_delta, jacobi_svd, select_rank, small_svd, JacobiSvd, SmallSvd};
pub use tensor::{padded_stride, random_tensor, random_tensor_in, DenseTensor, MatMut, MatRef, PaddedMatrix, Shape};
pub use tsmm::{transpose_reorder, tsmm_reshape};
pub use tsqr::{combine_factors, reduce_block, tsqr, tsqr_with_stats, BlockParams, TriangularFactor};
pub use ttsvd::{
    check_orthonormality, choose_combined_dims, collect_counters, tt_error, tt_reconstruct, tt_svd_distributed,
    tt_svd_distributed_with, tt_svd_reference, tt_svd_thick_bounds, tt_svd_thick_bounds_with, tt_svd_tsqr,
    tt_svd_tsqr_with, tt_svd_two_sided, tt_svd_two_sided_with, DistributedTt, ExecConfig, Phase, RunLog, Side,
    StepRecord, TTCore, TensorTrain, ThickBoundsParams, TruncationSpec,
};
