//! Roofline cost model for TSQR, TSMM and whole TT-SVD runs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tsqr::BlockParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandwidthKind {
    Load,
    Copy,
    Stream,
    Store,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineProfile {
    pub name: String,
    pub b_load: f64,
    pub b_copy: f64,
    pub b_stream: f64,
    pub b_store: f64,
    pub p_max: f64,
}

impl Default for MachineProfile {
    fn default() -> Self {
        Self::skylake_gold_6132()
    }
}

impl MachineProfile {
    /// Single socket of a 14-core Xeon Gold 6132, measured with likwid-bench.
    pub fn skylake_gold_6132() -> Self {
        Self {
            name: "skylake-gold-6132".into(),
            b_load: 93e9,
            b_copy: 70e9,
            b_stream: 73e9,
            b_store: 45e9,
            p_max: 1009e9,
        }
    }

    pub fn bandwidth(&self, kind: BandwidthKind) -> f64 {
        match kind {
            BandwidthKind::Load => self.b_load,
            BandwidthKind::Copy => self.b_copy,
            BandwidthKind::Stream => self.b_stream,
            BandwidthKind::Store => self.b_store,
        }
    }

    /// Flops per byte at which a kernel with this traffic becomes compute-bound.
    pub fn machine_intensity(&self, kind: BandwidthKind) -> f64 {
        self.p_max / self.bandwidth(kind)
    }

    /// Rejects non-positive values and returns warnings for an unusual
    /// bandwidth ordering. Infinite values are allowed as limits.
    pub fn validate(&self) -> Result<Vec<String>> {
        let fields = [
            ("b_load", self.b_load),
            ("b_copy", self.b_copy),
            ("b_stream", self.b_stream),
            ("b_store", self.b_store),
            ("p_max", self.p_max),
        ];
        if let Some((k, v)) = fields.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Parse(format!("{k} = {v} must be positive")));
        }
        let mut warnings = Vec::new();
        if self.b_store > self.b_copy {
            warnings.push(format!("b_store {} exceeds b_copy {}", self.b_store, self.b_copy));
        }
        if self.b_copy > self.b_load {
            warnings.push(format!("b_copy {} exceeds b_load {}", self.b_copy, self.b_load));
        }
        Ok(warnings)
    }

    /// Parses `key = value` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut vals: [Option<f64>; 5] = [None; 5];
        const KEYS: [&str; 5] = ["b_load", "b_copy", "b_stream", "b_store", "p_max"];
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "name" {
                name = Some(v.trim_matches('"').to_string());
                continue;
            }
            let idx = KEYS
                .iter()
                .position(|&key| key == k)
                .ok_or_else(|| Error::Parse(format!("line {}: unknown key {k}", ln + 1)))?;
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: {v} is not a number", ln + 1)))?;
            vals[idx] = Some(x);
        }
        let get = |i: usize| vals[i].ok_or_else(|| Error::Parse(format!("missing key {}", KEYS[i])));
        let p = Self {
            name: name.unwrap_or_else(|| "custom".into()),
            b_load: get(0)?,
            b_copy: get(1)?,
            b_stream: get(2)?,
            b_store: get(3)?,
            p_max: get(4)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "name = {}\nb_load = {:e}\nb_copy = {:e}\nb_stream = {:e}\nb_store = {:e}\np_max = {:e}\n",
            self.name, self.b_load, self.b_copy, self.b_stream, self.b_store, self.p_max
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Memory,
    Compute,
}

/// Flops and bytes of a kernel before a machine is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cost {
    pub n_flops: f64,
    pub v_bytes: f64,
}

impl Cost {
    pub fn new(n_flops: f64, v_bytes: f64) -> Self {
        Self { n_flops, v_bytes }
    }

    pub fn intensity(&self) -> f64 {
        self.n_flops / self.v_bytes
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, o: Cost) -> Cost {
        Cost::new(self.n_flops + o.n_flops, self.v_bytes + o.v_bytes)
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Self {
        iter.fold(Cost::default(), |a, b| a + b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub n_flops: f64,
    pub v_bytes: f64,
    pub i_c: f64,
    pub t_min: f64,
    pub bound: Bound,
}

pub fn roofline(cost: &Cost, profile: &MachineProfile, kind: BandwidthKind) -> CostEstimate {
    let b = profile.bandwidth(kind);
    let i_c = cost.intensity();
    let (t_min, bound) = if i_c > profile.p_max / b {
        (cost.n_flops / profile.p_max, Bound::Compute)
    } else {
        (cost.v_bytes / b, Bound::Memory)
    };
    CostEstimate {
        n_flops: cost.n_flops,
        v_bytes: cost.v_bytes,
        i_c,
        t_min,
        bound,
    }
}

/// `(1 + 1/n_b) 2 n m^2` flops over one read of `X`. `n_b` may be infinite.
pub fn tsqr_cost(n: f64, m: f64, n_b: f64) -> Cost {
    Cost::new((1.0 + 1.0 / n_b) * 2.0 * n * m * m, 8.0 * n * m)
}

pub fn tsmm_cost(n: f64, m: f64, k: f64) -> Cost {
    Cost::new(2.0 * n * m * k, 8.0 * n * (m + k))
}

/// Flops the TSQR kernel executes on an `n x m` matrix: `(2m^2 + m)` per
/// reduced row plus one extra row per block.
pub fn tsqr_executed_flops(n: usize, m: usize, n_b: usize) -> f64 {
    let per_row = (2 * m * m + m) as f64;
    let blocks = if n >= m { n.div_ceil(n_b.max(1)) } else { 1 };
    per_row * (n + blocks) as f64
}

fn check_f(f_bar: f64) -> Result<()> {
    if f_bar >= 1.0 || f_bar.is_nan() || f_bar <= 0.0 {
        return Err(Error::Divergence(f_bar));
    }
    Ok(())
}

/// Bytes moved by a TT-SVD whose steps all shrink the work by at most `f_bar`.
pub fn ttsvd_volume_estimate(n_bar: f64, f_bar: f64) -> Result<f64> {
    check_f(f_bar)?;
    Ok(8.0 * (2.0 * n_bar + f_bar * n_bar) / (1.0 - f_bar))
}

/// Flops of the TSQR and TSMM steps, neglecting the small SVDs.
pub fn ttsvd_flops_estimate(n_bar: f64, r_max: f64, f_bar: f64) -> Result<f64> {
    check_f(f_bar)?;
    Ok(2.0 * n_bar * r_max * (1.0 / f_bar + 2.0 / (1.0 - f_bar)))
}

/// Minimizer of `1/f + 2/(1-f)` on `(0, 1)`.
pub fn optimal_reduction_factor() -> f64 {
    std::f64::consts::SQRT_2 - 1.0
}

/// Ranks `r_0..r_d` a generic tensor reaches with cap `r_max`.
pub fn predicted_ranks(dims: &[usize], r_max: usize) -> Vec<usize> {
    let d = dims.len();
    let mut ranks = vec![1; d + 1];
    for i in (1..d).rev() {
        let left: usize = dims[..i].iter().fold(1usize, |a, &n| a.saturating_mul(n));
        ranks[i] = r_max.min(dims[i] * ranks[i + 1]).min(left);
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCost {
    /// Core index (1-based) of the leftmost core produced by the step.
    pub core: usize,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub reduction: f64,
    pub tsqr: Cost,
    pub tsmm: Cost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionPlan {
    pub factors: Vec<f64>,
    /// Largest factor over the modeled steps.
    pub f_bar: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepModel {
    pub steps: Vec<StepCost>,
    pub plan: ReductionPlan,
    pub total: Cost,
}

impl StepModel {
    /// Sum of Roofline times, TSQR on load bandwidth and TSMM on stream.
    pub fn t_min(&self, profile: &MachineProfile) -> f64 {
        self.steps
            .iter()
            .map(|s| {
                roofline(&s.tsqr, profile, BandwidthKind::Load).t_min
                    + roofline(&s.tsmm, profile, BandwidthKind::Stream).t_min
            })
            .sum()
    }
}

/// Step-by-step cost of a right-to-left TT-SVD with ranks `r_0..r_d`. The
/// first step combines the trailing `combine` dims. TSQR flops are the counts
/// the kernel executes with the cache-derived (or given) block size.
pub fn per_step_model(
    dims: &[usize],
    ranks: &[usize],
    combine: usize,
    block_rows: Option<usize>,
) -> Result<StepModel> {
    let d = dims.len();
    if d < 2 {
        return Err(Error::DegenerateDimension(d));
    }
    if ranks.len() != d + 1 || ranks[0] != 1 || ranks[d] != 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for {d} dims",
            ranks.len()
        )));
    }
    let k = combine.clamp(1, d - 1);
    let n_bar: usize = dims.iter().product();
    let nb = |m: usize| block_rows.unwrap_or_else(|| BlockParams::for_columns(m).n_b);
    let step = |core: usize, rows: usize, cols: usize, rank: usize, copy_only: bool| {
        let tsqr = if copy_only {
            Cost::new(0.0, 8.0 * (rows * cols) as f64)
        } else {
            Cost::new(tsqr_executed_flops(rows, cols, nb(cols)), 8.0 * (rows * cols) as f64)
        };
        StepCost {
            core,
            rows,
            cols,
            rank,
            reduction: rank as f64 / cols as f64,
            tsqr,
            tsmm: tsmm_cost(rows as f64, cols as f64, rank as f64),
        }
    };

    let mut steps = Vec::with_capacity(d);
    let mut hi = d;
    let mut r_right = 1;
    if k > 1 {
        let m: usize = dims[d - k..].iter().product();
        let rows = n_bar / m;
        hi = d - k;
        r_right = ranks[hi];
        steps.push(step(hi + 1, rows, m, r_right, rows < m));
    }
    for i in (2..=hi).rev() {
        let cols = dims[i - 1] * r_right;
        let rows: usize = dims[..i - 1].iter().product();
        steps.push(step(i, rows, cols, ranks[i - 1], false));
        r_right = ranks[i - 1];
    }
    let factors: Vec<f64> = steps.iter().map(|s| s.reduction).collect();
    let f_bar = factors.iter().copied().fold(0.0, f64::max);
    let total = steps.iter().map(|s| s.tsqr + s.tsmm).sum();
    Ok(StepModel {
        steps,
        plan: ReductionPlan { factors, f_bar },
        total,
    })
}
