//! Running one variant on a generated tensor.

use std::time::Instant;

use serde::Serialize;
use ttsvd::{
    derive_delta, random_tensor, tt_error, tt_svd_distributed_with, tt_svd_reference, tt_svd_thick_bounds_with,
    tt_svd_tsqr_with, tt_svd_two_sided_with, DenseTensor, ExecConfig, RunLog, Shape, TTCore, TensorTrain,
    ThickBoundsParams, TruncationSpec,
};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Reference,
    Tsqr,
    Thick,
    TwoSided,
    Distributed,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Reference => "reference",
            Variant::Tsqr => "tsqr",
            Variant::Thick => "thick",
            Variant::TwoSided => "two-sided",
            Variant::Distributed => "distributed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunParams {
    pub dims: Vec<usize>,
    pub r_max: Option<usize>,
    pub eps: f64,
    pub variant: Variant,
    pub f1_min: f64,
    pub m_min: usize,
    pub threads: usize,
    pub partitions: usize,
    pub seed: u64,
}

impl RunParams {
    pub fn new(dims: Vec<usize>, variant: Variant) -> Self {
        Self {
            dims,
            r_max: None,
            eps: 0.0,
            variant,
            f1_min: ThickBoundsParams::default().f1_min,
            m_min: ThickBoundsParams::default().m_min,
            threads: 1,
            partitions: 1,
            seed: 0,
        }
    }

    pub fn spec(&self) -> TruncationSpec {
        TruncationSpec::new(self.r_max.unwrap_or(usize::MAX), self.eps)
    }

    pub fn thick_params(&self) -> ThickBoundsParams {
        ThickBoundsParams {
            m_min: self.m_min,
            f1_min: self.f1_min,
            r_tilde: None,
        }
    }

    pub fn exec(&self) -> ExecConfig {
        ExecConfig::with_workers(self.threads)
    }

    /// Parameter sanity checks that do not depend on memory.
    pub fn validate(&self) -> CliResult<()> {
        if !(self.f1_min > 0.0 && self.f1_min <= 1.0) {
            return Err(CliError::Usage(format!("--f1min {} must lie in (0, 1]", self.f1_min)));
        }
        if self.m_min == 0 || self.threads == 0 || self.partitions == 0 || self.r_max == Some(0) {
            return Err(CliError::Usage("--mmin, --threads, --partitions and --rmax must be positive".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(CliError::Usage(format!("--eps {} must be finite and non-negative", self.eps)));
        }
        Ok(())
    }
}

pub fn generate(dims: &[usize], seed: u64) -> CliResult<DenseTensor> {
    Ok(random_tensor(&Shape::new(dims.to_vec())?, seed)?)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub tt: TensorTrain,
    pub log: RunLog,
    pub seconds: f64,
}

/// Runs the selected variant on `x` inside a pool of `params.threads`.
pub fn run(x: &DenseTensor, params: &RunParams) -> CliResult<RunOutput> {
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| run_in_pool(x, params))
}

fn run_in_pool(x: &DenseTensor, params: &RunParams) -> CliResult<RunOutput> {
    let spec = params.spec();
    let cfg = params.exec();
    let mut log = RunLog::default();
    let t = Instant::now();
    let tt = match params.variant {
        Variant::Reference => tt_svd_reference(x, &spec)?,
        Variant::Tsqr => tt_svd_tsqr_with(x, &spec, &cfg, &mut log)?,
        Variant::Thick => tt_svd_thick_bounds_with(x, &spec, &params.thick_params(), &cfg, &mut log)?,
        Variant::TwoSided => tt_svd_two_sided_with(x, &spec, &params.thick_params(), &cfg, &mut log)?,
        Variant::Distributed => distributed(x, params, &cfg, &mut log)?,
    };
    Ok(RunOutput {
        tt,
        log,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Splits `x` along its first index into `P` interleaved slabs, so the
/// stacked tensor is `x` seen as `(P, n_1 / P, n_2, ...)`, then merges the
/// first two cores back into one.
fn distributed(x: &DenseTensor, params: &RunParams, cfg: &ExecConfig, log: &mut RunLog) -> CliResult<TensorTrain> {
    let dims = x.dims();
    let p = params.partitions;
    if dims[0] % p != 0 {
        return Err(CliError::Lib(ttsvd::Error::PartitionMismatch(format!(
            "{p} partitions do not divide the leading dimension {}",
            dims[0]
        ))));
    }
    let mut slab_dims = dims.to_vec();
    slab_dims[0] /= p;
    let flat = x.to_col_major();
    let slabs = (0..p)
        .map(|k| {
            let vals: Vec<f64> = flat.iter().skip(k).step_by(p).copied().collect();
            DenseTensor::from_col_major(Shape::new(slab_dims.clone())?, &vals)
        })
        .collect::<ttsvd::Result<Vec<_>>>()?;
    // The stacked tensor has one more index; keep the threshold of `x`.
    let mut spec = params.spec();
    spec.delta = Some(derive_delta(x.frobenius_norm(), params.eps, dims.len())?);
    let out = tt_svd_distributed_with(&slabs, &spec, cfg, log)?;
    let mut cores = out.tt.into_cores();
    let (c1, c2) = (&cores[0], &cores[1]);
    let (q, r1, r2) = (c2.n(), c1.r_right(), c2.r_right());
    let mut data = vec![0.0; p * q * r2];
    for c in 0..r2 {
        for i in 0..q {
            for k in 0..p {
                data[k + p * i + p * q * c] = (0..r1).map(|a| c1.get(0, k, a) * c2.get(a, i, c)).sum();
            }
        }
    }
    let merged = TTCore::new(1, p * q, r2, data)?;
    cores.splice(0..2, [merged]);
    Ok(TensorTrain::new(cores)?)
}

/// Error bound checked by `--verify`: `eps + 1e-10` when ranks are uncapped.
pub fn verify(x: &DenseTensor, out: &RunOutput, params: &RunParams) -> CliResult<f64> {
    let err = tt_error(x, &out.tt)?;
    let bound = params.eps + 1e-10;
    if params.r_max.is_none() && !(err <= bound) {
        return Err(CliError::Verify { error: err, bound });
    }
    Ok(err)
}
