//! Roofline table for a planned run.

use std::fmt::Write as _;

use serde::Serialize;
use ttsvd::perfmodel::{
    per_step_model, predicted_ranks, roofline, ttsvd_flops_estimate, ttsvd_volume_estimate, BandwidthKind, Bound,
    Cost, CostEstimate, MachineProfile,
};
use ttsvd::{choose_combined_dims, ThickBoundsParams};

use crate::error::CliResult;
use crate::run::Variant;
use crate::shape::format_shape;

#[derive(Clone, Debug, Serialize)]
pub struct KernelRow {
    pub step: usize,
    pub core: usize,
    pub kernel: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub n_flops: f64,
    pub v_bytes: f64,
    pub i_c: f64,
    pub t_min: f64,
    pub bound: &'static str,
}

/// Closed-form totals for a run whose steps all reduce by at most `f_bar`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundEstimate {
    pub f_bar: f64,
    pub n_flops: f64,
    pub v_bytes: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelReport {
    pub variant: Variant,
    pub shape: String,
    pub profile: String,
    pub ranks: Vec<usize>,
    pub combined_dims: usize,
    pub kernels: Vec<KernelRow>,
    pub n_flops: f64,
    pub v_bytes: f64,
    pub t_min: f64,
    /// `None` when the reduction factor does not stay below one.
    pub estimate: Option<BoundEstimate>,
}

fn bound_str(b: Bound) -> &'static str {
    match b {
        Bound::Memory => "memory",
        Bound::Compute => "compute",
    }
}

/// Reduction factor used for the closed-form estimate: the prescribed first
/// step factor for the thick variants, otherwise the largest step factor.
pub fn nominal_reduction(variant: Variant, params: &ThickBoundsParams, plan_f_bar: f64) -> f64 {
    match variant {
        Variant::Thick | Variant::TwoSided if params.f1_min < 1.0 => params.f1_min,
        _ => plan_f_bar,
    }
}

pub fn model(
    dims: &[usize],
    variant: Variant,
    r_max: Option<usize>,
    params: &ThickBoundsParams,
    block_rows: Option<usize>,
    profile: &MachineProfile,
) -> CliResult<ModelReport> {
    let r = r_max.unwrap_or(usize::MAX);
    let ranks = predicted_ranks(dims, r);
    let k = match variant {
        Variant::Thick | Variant::TwoSided => choose_combined_dims(dims, params.r_tilde.unwrap_or(r), params),
        _ => 1,
    };
    let m = per_step_model(dims, &ranks, k, block_rows)?;
    let mut kernels = Vec::with_capacity(2 * m.steps.len());
    for (i, s) in m.steps.iter().enumerate() {
        for (name, cost, kind) in [("tsqr", s.tsqr, BandwidthKind::Load), ("tsmm", s.tsmm, BandwidthKind::Stream)] {
            let e = roofline(&cost, profile, kind);
            kernels.push(KernelRow {
                step: i + 1,
                core: s.core,
                kernel: name,
                rows: s.rows,
                cols: s.cols,
                rank: s.rank,
                n_flops: e.n_flops,
                v_bytes: e.v_bytes,
                i_c: e.i_c,
                t_min: e.t_min,
                bound: bound_str(e.bound),
            });
        }
    }
    let n_bar: f64 = dims.iter().map(|&n| n as f64).product();
    let f_bar = nominal_reduction(variant, params, m.plan.f_bar);
    let r_eff = ranks.iter().copied().max().unwrap_or(1) as f64;
    let estimate = match (ttsvd_volume_estimate(n_bar, f_bar), ttsvd_flops_estimate(n_bar, r_eff, f_bar)) {
        (Ok(v), Ok(f)) => Some(BoundEstimate {
            f_bar,
            n_flops: f,
            v_bytes: v,
        }),
        _ => None,
    };
    Ok(ModelReport {
        variant,
        shape: format_shape(dims),
        profile: profile.name.clone(),
        ranks,
        combined_dims: k,
        n_flops: m.total.n_flops,
        v_bytes: m.total.v_bytes,
        t_min: m.t_min(profile),
        kernels,
        estimate,
    })
}

impl ModelReport {
    /// Roofline summary of the closed-form estimate on stream bandwidth.
    pub fn estimate_roofline(&self, profile: &MachineProfile) -> Option<CostEstimate> {
        self.estimate
            .as_ref()
            .map(|e| roofline(&Cost::new(e.n_flops, e.v_bytes), profile, BandwidthKind::Stream))
    }

    pub fn to_text(&self, profile: &MachineProfile) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} on {} ({}), ranks {:?}", self.variant.as_str(), self.shape, self.profile, self.ranks);
        let _ = writeln!(
            s,
            "{:>4} {:>4} {:>6} {:>12} {:>6} {:>6} {:>12} {:>12} {:>8} {:>12} {:>8}",
            "step", "core", "kernel", "rows", "cols", "rank", "GFlop", "GByte", "I_c", "t_min[s]", "bound"
        );
        for k in &self.kernels {
            let _ = writeln!(
                s,
                "{:>4} {:>4} {:>6} {:>12} {:>6} {:>6} {:>12.4} {:>12.4} {:>8.3} {:>12.4e} {:>8}",
                k.step,
                k.core,
                k.kernel,
                k.rows,
                k.cols,
                k.rank,
                k.n_flops / 1e9,
                k.v_bytes / 1e9,
                k.i_c,
                k.t_min,
                k.bound
            );
        }
        let _ = writeln!(
            s,
            "total: {:.3} GFlop, {:.3} GByte, t_min {:.4e} s",
            self.n_flops / 1e9,
            self.v_bytes / 1e9,
            self.t_min
        );
        match (&self.estimate, self.estimate_roofline(profile)) {
            (Some(e), Some(r)) => {
                let _ = writeln!(
                    s,
                    "estimate (f_bar = {:.4}): {:.3} GFlop, {:.3} GByte, I_c {:.3}, t_min {:.4e} s, {}",
                    e.f_bar,
                    e.n_flops / 1e9,
                    e.v_bytes / 1e9,
                    r.i_c,
                    r.t_min,
                    bound_str(r.bound)
                );
            }
            _ => {
                let _ = writeln!(s, "estimate: reduction factor reaches 1, closed-form bound diverges");
            }
        }
        s
    }
}
