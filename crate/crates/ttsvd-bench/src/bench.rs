//! Repeated timing runs and host sanity checks against a copy baseline.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use ttsvd::perfmodel::MachineProfile;
use ttsvd::{tsqr, BlockParams, DenseTensor, PaddedMatrix};

use crate::error::{CliError, CliResult};
use crate::model::model;
use crate::report::Format;
use crate::run::{run, RunParams, Variant};
use crate::shape::format_shape;

/// Smallest TSQR bandwidth as a fraction of the copy baseline.
pub const TSQR_COPY_RATIO: f64 = 0.3;
/// Largest thick-bounds rank-1 wall time in units of one buffer copy.
pub const THICK_COPY_FACTOR: f64 = 10.0;
/// Elements used by the bandwidth probes, large enough to leave the caches.
pub const PROBE_ELEMENTS: usize = 1 << 24;

#[derive(Clone, Debug, Serialize)]
pub struct BenchEntry {
    pub variant: Variant,
    pub shape: String,
    pub rmax: Option<u64>,
    pub eps: f64,
    /// Timed samples, warm-up excluded unless requested.
    pub samples: Vec<f64>,
    pub min_seconds: f64,
    pub median_seconds: f64,
    pub flops: u64,
    pub bytes: u64,
    pub gflops_per_s: f64,
    pub gbytes_per_s: f64,
    pub ranks: Vec<usize>,
    /// Per-step model bytes, if the variant is modeled.
    pub modeled_bytes: Option<f64>,
    /// Closed-form volume estimate.
    pub estimate_bytes: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TsqrProbe {
    pub m: usize,
    pub gbytes_per_s: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HostChecks {
    pub elements: usize,
    pub copy_seconds: f64,
    /// Read plus write traffic of the copy.
    pub copy_gbytes_per_s: f64,
    pub tsqr: Vec<TsqrProbe>,
    pub thick_seconds: f64,
    pub thick_copy_ratio: f64,
    pub input_copy_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
    pub host: Option<HostChecks>,
    pub warnings: Vec<String>,
}

fn best_of<T>(n: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..n {
        let t = Instant::now();
        let v = f();
        best = best.min(t.elapsed().as_secs_f64());
        last = Some(v);
    }
    (best, last.expect("n > 0"))
}

fn copy_seconds(src: &[f64], dst: &mut [f64]) -> f64 {
    best_of(5, || {
        dst.copy_from_slice(src);
        std::hint::black_box(&mut *dst);
    })
    .0
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Measures a copy baseline, TSQR bandwidth for `m <= 16`, and the rank-1
/// thick-bounds wall time on `x`. Violations become warnings.
pub fn host_checks(x: &DenseTensor, threads: usize, warnings: &mut Vec<String>) -> CliResult<HostChecks> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| {
        let n = PROBE_ELEMENTS;
        let src: Vec<f64> = (0..n).map(|i| (i % 1000) as f64 * 1e-3).collect();
        let mut dst = vec![0.0; n];
        let copy = copy_seconds(&src, &mut dst);
        let copy_bw = 16.0 * n as f64 / copy;
        let mut probes = Vec::new();
        for m in [1usize, 2, 4, 8, 16] {
            let rows = n / m;
            let a = PaddedMatrix::from_col_major(rows, m, &src[..rows * m])?;
            let params = BlockParams::for_columns(m);
            tsqr(a.as_ref(), &params, threads)?;
            let (t, _) = best_of(3, || tsqr(a.as_ref(), &params, threads));
            let bw = 8.0 * (rows * m) as f64 / t;
            let ratio = bw / copy_bw;
            if ratio < TSQR_COPY_RATIO {
                warnings.push(format!(
                    "TSQR m={m} reaches {:.2} GByte/s, {:.0}% of the {:.2} GByte/s copy baseline (want {:.0}%)",
                    bw / 1e9,
                    100.0 * ratio,
                    copy_bw / 1e9,
                    100.0 * TSQR_COPY_RATIO
                ));
            }
            probes.push(TsqrProbe {
                m,
                gbytes_per_s: bw / 1e9,
                ratio,
            });
        }
        let input = x.data();
        let mut buf = vec![0.0; input.len()];
        let input_copy = copy_seconds(input, &mut buf);
        drop(buf);
        let mut p = RunParams::new(x.dims().to_vec(), Variant::Thick);
        p.r_max = Some(1);
        p.threads = threads.max(1);
        run(x, &p)?;
        let (thick, _) = best_of(2, || run(x, &p));
        let ratio = thick / input_copy;
        if ratio > THICK_COPY_FACTOR {
            warnings.push(format!(
                "thick-bounds rank-1 run takes {thick:.4e} s, {ratio:.1}x one input copy (want at most {THICK_COPY_FACTOR}x)"
            ));
        }
        Ok(HostChecks {
            elements: n,
            copy_seconds: copy,
            copy_gbytes_per_s: copy_bw / 1e9,
            tsqr: probes,
            thick_seconds: thick,
            thick_copy_ratio: ratio,
            input_copy_seconds: input_copy,
        })
    })
}

/// Runs each parameter set `repeats` times on `x`. The first run is dropped
/// unless `keep_warmup`.
pub fn bench(
    x: &DenseTensor,
    runs: &[RunParams],
    repeats: usize,
    keep_warmup: bool,
    profile: &MachineProfile,
) -> CliResult<Vec<BenchEntry>> {
    if repeats < 2 {
        return Err(CliError::Usage("--repeats must be at least 2".into()));
    }
    let mut entries = Vec::with_capacity(runs.len());
    for p in runs {
        let mut samples = Vec::with_capacity(repeats);
        let mut last = None;
        for i in 0..repeats {
            let out = run(x, p)?;
            if i > 0 || keep_warmup {
                samples.push(out.seconds);
            }
            last = Some(out);
        }
        let out = last.expect("repeats >= 2");
        let c = out.log.counters();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let min = sorted[0];
        let modeled = match p.variant {
            Variant::Reference => None,
            v => model(&p.dims, v, p.r_max, &p.thick_params(), None, profile).ok(),
        };
        entries.push(BenchEntry {
            variant: p.variant,
            shape: format_shape(&p.dims),
            rmax: p.r_max.map(|r| r as u64),
            eps: p.eps,
            min_seconds: min,
            median_seconds: median(&sorted),
            flops: c.flops,
            bytes: c.bytes,
            gflops_per_s: c.flops as f64 / min / 1e9,
            gbytes_per_s: c.bytes as f64 / min / 1e9,
            ranks: out.tt.ranks(),
            modeled_bytes: modeled.as_ref().map(|m| m.v_bytes),
            estimate_bytes: modeled.and_then(|m| m.estimate.map(|e| e.v_bytes)),
            samples,
        });
    }
    Ok(entries)
}

#[derive(Serialize)]
struct CsvEntry<'a> {
    variant: &'a str,
    shape: &'a str,
    rmax: Option<u64>,
    eps: f64,
    samples: usize,
    min_seconds: f64,
    median_seconds: f64,
    flops: u64,
    bytes: u64,
    gflops_per_s: f64,
    gbytes_per_s: f64,
    modeled_bytes: Option<f64>,
    estimate_bytes: Option<f64>,
    ranks: String,
    warnings: String,
}

pub fn write_bench(report: &BenchReport, format: Format, out: impl Write) -> CliResult<()> {
    match format {
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let warnings = report.warnings.join("; ");
            for e in &report.entries {
                w.serialize(CsvEntry {
                    variant: e.variant.as_str(),
                    shape: &e.shape,
                    rmax: e.rmax,
                    eps: e.eps,
                    samples: e.samples.len(),
                    min_seconds: e.min_seconds,
                    median_seconds: e.median_seconds,
                    flops: e.flops,
                    bytes: e.bytes,
                    gflops_per_s: e.gflops_per_s,
                    gbytes_per_s: e.gbytes_per_s,
                    modeled_bytes: e.modeled_bytes,
                    estimate_bytes: e.estimate_bytes,
                    ranks: e.ranks.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "),
                    warnings: warnings.clone(),
                })?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
