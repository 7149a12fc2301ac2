//! TT-SVD drivers.
//!
//! All variants peel cores off a work matrix whose size shrinks by the
//! reduction factor `f = r_{i-1} / (n_i r_i)` at every step.

mod ops;
mod reference;
mod sweep;
mod thick;
mod two_sided;

use std::time::Instant;

pub use ops::{check_orthonormality, tt_error, tt_reconstruct, tt_reconstruct_in};
pub use reference::tt_svd_reference;
pub use sweep::{tt_svd_distributed, tt_svd_distributed_with, tt_svd_tsqr, tt_svd_tsqr_with, DistributedTt};
pub use thick::{choose_combined_dims, tt_svd_thick_bounds, tt_svd_thick_bounds_with};
pub use two_sided::{tt_svd_two_sided, tt_svd_two_sided_with};

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::tensor::DEFAULT_MEMORY_BUDGET;
use crate::tsqr::{BlockParams, L2_BUDGET_BYTES};

/// Core `T` of shape `(r_left, n, r_right)`, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TTCore {
    r_left: usize,
    n: usize,
    r_right: usize,
    data: Vec<f64>,
}

impl TTCore {
    pub fn new(r_left: usize, n: usize, r_right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != r_left * n * r_right {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {r_left}x{n}x{r_right} core",
                data.len()
            )));
        }
        Ok(Self {
            r_left,
            n,
            r_right,
            data,
        })
    }

    pub fn r_left(&self) -> usize {
        self.r_left
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_right(&self) -> usize {
        self.r_right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[a + self.r_left * (b + self.n * c)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    cores: Vec<TTCore>,
}

impl TensorTrain {
    pub fn new(cores: Vec<TTCore>) -> Result<Self> {
        let (first, last) = match (cores.first(), cores.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::Shape("a tensor train needs at least one core".into())),
        };
        if first.r_left != 1 || last.r_right != 1 {
            return Err(Error::DimensionMismatch("boundary ranks must be 1".into()));
        }
        for (i, w) in cores.windows(2).enumerate() {
            if w[0].r_right != w[1].r_left {
                return Err(Error::DimensionMismatch(format!(
                    "rank mismatch between cores {} and {}: {} vs {}",
                    i + 1,
                    i + 2,
                    w[0].r_right,
                    w[1].r_left
                )));
            }
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[TTCore] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<TTCore> {
        self.cores
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// `(r_0, ..., r_d)` with `r_0 = r_d = 1`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.r_right))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationSpec {
    pub r_max: usize,
    pub eps: f64,
    /// Per-step threshold. Derived from the first step when `None`.
    pub delta: Option<f64>,
}

impl TruncationSpec {
    pub fn new(r_max: usize, eps: f64) -> Self {
        Self {
            r_max: r_max.max(1),
            eps,
            delta: None,
        }
    }

    /// Uncapped ranks with relative accuracy `eps`.
    pub fn accuracy(eps: f64) -> Self {
        Self::new(usize::MAX, eps)
    }

    pub(crate) fn with_delta(self, delta: f64) -> Self {
        Self {
            delta: Some(delta),
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThickBoundsParams {
    /// Smallest combined trailing dimension.
    pub m_min: usize,
    /// Smallest admissible first reduction factor.
    pub f1_min: f64,
    /// Expected rank, defaults to `r_max`.
    pub r_tilde: Option<usize>,
}

impl Default for ThickBoundsParams {
    fn default() -> Self {
        Self {
            m_min: 16,
            f1_min: 0.5,
            r_tilde: None,
        }
    }
}

impl ThickBoundsParams {
    /// Parameters that never combine dimensions.
    pub fn disabled() -> Self {
        Self {
            m_min: 1,
            f1_min: 1.0,
            r_tilde: Some(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecConfig {
    /// TSQR workers per partition. Results depend on this value.
    pub workers: usize,
    pub l2_bytes: usize,
    /// Fixed TSQR block rows instead of the cache-derived size.
    pub block_rows: Option<usize>,
    pub memory_budget: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            l2_bytes: L2_BUDGET_BYTES,
            block_rows: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl ExecConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
            ..Self::default()
        }
    }

    pub(crate) fn block_params(&self, m: usize) -> BlockParams {
        match self.block_rows {
            Some(nb) => BlockParams::with_block_rows(nb),
            None => BlockParams::with_budget(m, self.l2_bytes),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Tsqr,
    Svd,
    Tsmm,
    Reorder,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Tsqr, Phase::Svd, Phase::Tsmm, Phase::Reorder];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Tsqr => "tsqr",
            Phase::Svd => "svd",
            Phase::Tsmm => "tsmm",
            Phase::Reorder => "reorder",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Peels the rightmost remaining core.
    Right,
    /// Peels the leftmost remaining core.
    Left,
    /// Peels several trailing cores from a combined dimension.
    Boundary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseRecord {
    pub seconds: f64,
    pub counters: Counters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based index of the (first) core produced.
    pub core: usize,
    pub side: Side,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// `rank / cols`.
    pub reduction: f64,
    pub phases: [PhaseRecord; 4],
}

impl StepRecord {
    fn new(core: usize, side: Side, rows: usize, cols: usize) -> Self {
        Self {
            core,
            side,
            rows,
            cols,
            rank: 0,
            reduction: 0.0,
            phases: [PhaseRecord::default(); 4],
        }
    }

    fn set_rank(&mut self, rank: usize) {
        self.rank = rank;
        self.reduction = rank as f64 / self.cols as f64;
    }

    pub fn phase(&self, p: Phase) -> &PhaseRecord {
        &self.phases[p as usize]
    }

    fn add(&mut self, p: Phase, start: Instant, counters: Counters) {
        let rec = &mut self.phases[p as usize];
        rec.seconds += start.elapsed().as_secs_f64();
        rec.counters += counters;
    }

    pub fn counters(&self) -> Counters {
        self.phases.iter().map(|p| p.counters).sum()
    }
}

/// Per-run instrumentation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepRecord>,
    /// Truncation threshold used for every step.
    pub delta: f64,
}

impl RunLog {
    pub fn counters(&self) -> Counters {
        self.steps.iter().map(|s| s.counters()).sum()
    }

    /// Ranks chosen by the recorded steps, in execution order.
    pub fn step_ranks(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.rank).collect()
    }

    pub fn reductions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reduction).collect()
    }
}

/// Total counters of a run.
pub fn collect_counters(log: &RunLog) -> Counters {
    log.counters()
}

/// Core from the first `r` columns of `V` (`m x m`) as `(r, n, r_right)`.
fn core_from_vt(v: &[f64], m: usize, r: usize, n: usize, r_right: usize) -> TTCore {
    debug_assert_eq!(m, n * r_right);
    let mut data = vec![0.0; r * m];
    for a in 0..r {
        for j in 0..m {
            data[a + r * j] = v[j + m * a];
        }
    }
    TTCore::new(r, n, r_right, data).expect("consistent core size")
}

/// Core from an `(r_left n) x r` column-major block.
fn core_from_cols(block: Vec<f64>, r_left: usize, n: usize, r: usize) -> TTCore {
    TTCore::new(r_left, n, r, block).expect("consistent core size")
}
