//! Command line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use ttsvd::perfmodel::MachineProfile;

use crate::bench::{bench, host_checks, write_bench, BenchReport};
use crate::error::{CliError, CliResult};
use crate::model::model;
use crate::report::{rows_from_log, write_rows, Format};
use crate::run::{generate, run, verify, RunParams, Variant};
use crate::shape::{format_shape, parse_shape};

#[derive(Parser, Debug)]
#[command(name = "ttsvd-bench", version, about = "TT-SVD driver, benchmark and cost model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decompose a seeded random tensor and report per-step phase timings.
    Decompose(DecomposeArgs),
    /// Time repeated runs of one or more variants.
    Bench(BenchArgs),
    /// Print the Roofline model of a run without executing it.
    Model(ModelArgs),
}

fn parse_rmax(s: &str) -> Result<usize, String> {
    match s {
        "inf" | "none" => Ok(usize::MAX),
        _ => s.parse::<usize>().map_err(|e| e.to_string()),
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Tensor shape, e.g. `2^20`, `4x4x2` or `3x2^10`.
    #[arg(long)]
    pub shape: String,
    /// Maximal TT rank; `inf` for uncapped.
    #[arg(long, value_parser = parse_rmax, default_value = "inf")]
    pub rmax: usize,
    /// Relative accuracy of the whole train.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Smallest reduction of the first thick-bounds step.
    #[arg(long, default_value_t = 0.5)]
    pub f1min: f64,
    /// Smallest combined trailing dimension.
    #[arg(long, default_value_t = 16)]
    pub mmin: usize,
    /// Worker threads; defaults to the logical core count.
    #[arg(long, env = "TTSVD_THREADS")]
    pub threads: Option<usize>,
    /// Row partitions of the distributed variant.
    #[arg(long, default_value_t = 1)]
    pub partitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Common {
    pub fn params(&self, variant: Variant) -> CliResult<RunParams> {
        let dims = parse_shape(&self.shape)?;
        let p = RunParams {
            dims,
            r_max: (self.rmax != usize::MAX).then_some(self.rmax),
            eps: self.eps,
            variant,
            f1_min: self.f1min,
            m_min: self.mmin,
            threads: self
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            partitions: self.partitions,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "tsqr")]
    pub variant: Variant,
    /// Reconstruct and check the error; fails if it exceeds eps with uncapped ranks.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the train here.
    #[arg(long)]
    pub save: Option<PathBuf>,
    /// Write a JSON summary of the run here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Machine profile with `key = value` lines; Skylake Gold 6132 when absent.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tsqr,thick")]
    pub variant: Vec<Variant>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Keep the first (warm-up) sample.
    #[arg(long)]
    pub keep_warmup: bool,
    /// Skip the copy-baseline checks.
    #[arg(long)]
    pub no_host_checks: bool,
    /// Machine profile with `key = value` lines; Skylake Gold 6132 when absent.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    pub shape: String,
    #[arg(long, value_parser = parse_rmax, default_value = "inf")]
    pub rmax: usize,
    #[arg(long, value_enum, default_value = "tsqr")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.5)]
    pub f1min: f64,
    #[arg(long, default_value_t = 16)]
    pub mmin: usize,
    /// Fixed TSQR block rows instead of the cache-derived size.
    #[arg(long)]
    pub block_rows: Option<usize>,
    /// Machine profile with `key = value` lines; Skylake Gold 6132 when absent.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Machine-readable output instead of the text table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Summary of one decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub variant: Variant,
    pub shape: String,
    pub ranks: Vec<usize>,
    pub wall_seconds: f64,
    pub flops: u64,
    pub bytes: u64,
    pub error: Option<f64>,
    pub modeled_bytes: Option<f64>,
    /// Closed-form volume in elements of the input size.
    pub estimate_volume_per_element: Option<f64>,
}

fn load_profile(path: Option<&Path>) -> CliResult<MachineProfile> {
    let p = match path {
        Some(path) => MachineProfile::load(path).map_err(|e| CliError::Usage(format!("profile {}: {e}", path.display())))?,
        None => MachineProfile::default(),
    };
    for w in p.validate().map_err(|e| CliError::Usage(e.to_string()))? {
        eprintln!("warning: profile {}: {w}", p.name);
    }
    Ok(p)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn decompose(args: &DecomposeArgs) -> CliResult<Summary> {
    let params = args.common.params(args.variant)?;
    let profile = load_profile(args.profile.as_deref())?;
    let x = generate(&params.dims, params.seed)?;
    let out = run(&x, &params)?;
    let error = if args.verify {
        Some(verify(&x, &out, &params)?)
    } else {
        None
    };
    let shape = format_shape(&params.dims);
    let rows = rows_from_log(params.variant.as_str(), &shape, params.r_max, params.eps, &out.log);
    let mut w = output(args.out.as_deref())?;
    write_rows(&rows, args.format, &mut w)?;
    w.flush()?;
    if let Some(path) = &args.save {
        ttsvd::io::save_tt(path, &out.tt)?;
    }
    let m = match params.variant {
        Variant::Reference => None,
        v => model(&params.dims, v, params.r_max, &params.thick_params(), None, &profile).ok(),
    };
    let c = out.log.counters();
    let summary = Summary {
        variant: params.variant,
        shape,
        ranks: out.tt.ranks(),
        wall_seconds: out.seconds,
        flops: c.flops,
        bytes: c.bytes,
        error,
        modeled_bytes: m.as_ref().map(|m| m.v_bytes),
        estimate_volume_per_element: m.and_then(|m| m.estimate).map(|e| e.v_bytes / 8.0 / x.numel() as f64),
    };
    if let Some(path) = &args.summary {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &summary)?;
    }
    Ok(summary)
}

pub fn bench_cmd(args: &BenchArgs) -> CliResult<BenchReport> {
    let profile = load_profile(args.profile.as_deref())?;
    let runs = args
        .variant
        .iter()
        .map(|&v| args.common.params(v))
        .collect::<CliResult<Vec<_>>>()?;
    let first = runs.first().ok_or_else(|| CliError::Usage("no variants given".into()))?;
    let x = generate(&first.dims, first.seed)?;
    let entries = bench(&x, &runs, args.repeats, args.keep_warmup, &profile)?;
    let mut warnings = Vec::new();
    if entries.windows(2).any(|w| w[0].ranks != w[1].ranks) {
        warnings.push("variants chose different ranks".to_string());
    }
    let host = if args.no_host_checks {
        None
    } else {
        Some(host_checks(&x, first.threads, &mut warnings)?)
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = BenchReport { entries, host, warnings };
    let mut w = output(args.out.as_deref())?;
    write_bench(&report, args.format, &mut w)?;
    w.flush()?;
    Ok(report)
}

pub fn model_cmd(args: &ModelArgs) -> CliResult<()> {
    let profile = load_profile(args.profile.as_deref())?;
    let dims = parse_shape(&args.shape)?;
    let params = ttsvd::ThickBoundsParams {
        m_min: args.mmin,
        f1_min: args.f1min,
        r_tilde: None,
    };
    if !(params.f1_min > 0.0 && params.f1_min <= 1.0) || params.m_min == 0 {
        return Err(CliError::Usage("--f1min must lie in (0, 1] and --mmin be positive".into()));
    }
    let r_max = (args.rmax != usize::MAX).then_some(args.rmax);
    let report = model(&dims, args.variant, r_max, &params, args.block_rows, &profile)?;
    let mut w = output(args.out.as_deref())?;
    if args.json {
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
    } else {
        w.write_all(report.to_text(&profile).as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match &cli.command {
        Command::Decompose(a) => decompose(a).map(|s| {
            let ranks: Vec<String> = s.ranks.iter().map(|r| r.to_string()).collect();
            eprintln!("variant={} shape={} ranks={}", s.variant.as_str(), s.shape, ranks.join(","));
            eprintln!("wall_seconds={:.6} flops={} bytes={}", s.wall_seconds, s.flops, s.bytes);
            if let Some(e) = s.error {
                eprintln!("error={e:e}");
            }
            if let Some(v) = s.estimate_volume_per_element {
                eprintln!("estimated_volume={v:.3} x input elements");
            }
        }),
        Command::Bench(a) => bench_cmd(a).map(|_| ()),
        Command::Model(a) => model_cmd(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
