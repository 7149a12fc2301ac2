//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Criterion 9 depends on the host and only warns. The binary exits
//! non-zero when any other criterion fails.

use std::time::Instant;

use ttsvd::perfmodel::{per_step_model, predicted_ranks, ttsvd_flops_estimate, ttsvd_volume_estimate, MachineProfile};
use ttsvd::{
    choose_combined_dims, jacobi_svd, random_tensor, small_svd, tsqr, tt_error, tt_reconstruct, tt_svd_distributed,
    tt_svd_reference, tt_svd_thick_bounds, tt_svd_thick_bounds_with, tt_svd_tsqr, tt_svd_tsqr_with, tt_svd_two_sided,
    BlockParams, DenseTensor, ExecConfig, MatRef, PaddedMatrix, RunLog, Shape, TTCore, TensorTrain, ThickBoundsParams,
    TruncationSpec,
};
use ttsvd_bench::bench::host_checks;
use ttsvd_bench::model::model;
use ttsvd_bench::report::rows_from_log;
use ttsvd_bench::run::{run, RunParams, Variant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tensor(dims: &[usize], seed: u64) -> DenseTensor {
    random_tensor(&Shape::new(dims.to_vec()).unwrap(), seed).unwrap()
}

/// Uniform values in `[-0.5, 0.5)` from the seeded tensor generator.
fn uniform(len: usize, seed: u64) -> Vec<f64> {
    tensor(&[len], seed).to_col_major().into_iter().map(|v| v - 0.5).collect()
}

/// Relative errors agree to 1e-10, or both are at rounding level.
fn same_error(a: f64, b: f64) -> bool {
    (a <= 1e-12 && b <= 1e-12) || (a - b).abs() <= 1e-10 * a.max(b)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_oracle_equivalence() -> Outcome {
    let shapes: [&[usize]; 4] = [&[2; 12], &[4; 6], &[8; 4], &[2, 3, 4, 5, 6]];
    let specs = [(1, 0.0), (4, 0.0), (8, 1e-2), (usize::MAX, 1e-1)];
    let names = ["tsqr", "thick", "two-sided"];
    let mut bad = [0usize; 3];
    let mut worst = [0.0f64; 3];
    let mut total = 0;
    let t = Instant::now();
    for k in 0..20 {
        let dims = shapes[k % 4];
        let x = tensor(dims, 1000 + k as u64);
        for &(r, eps) in &specs {
            let spec = TruncationSpec::new(r, eps);
            let want = tt_svd_reference(&x, &spec).unwrap();
            let e0 = tt_error(&x, &want).unwrap();
            let got = [
                tt_svd_tsqr(&x, &spec).unwrap(),
                tt_svd_thick_bounds(&x, &spec, &ThickBoundsParams::default()).unwrap(),
                tt_svd_two_sided(&x, &spec, &ThickBoundsParams::default()).unwrap(),
            ];
            for (v, tt) in got.iter().enumerate() {
                total += 1;
                let e = tt_error(&x, tt).unwrap();
                if e0 > 1e-12 {
                    worst[v] = worst[v].max(rel(e, e0));
                }
                if tt.ranks() != want.ranks() || !same_error(e, e0) {
                    bad[v] += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let detail = names
        .iter()
        .zip(bad.iter().zip(&worst))
        .map(|(n, (b, w))| format!("{n}: {b} mismatches, worst rel. error gap {w:.1e}"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        bad.iter().all(|&b| b == 0) && secs < 60.0,
        format!("{total} runs in {secs:.1} s; {detail}"),
    )
}

fn c2_error_guarantee() -> Outcome {
    let mut worst_slack = f64::NEG_INFINITY;
    let mut trials = 0;
    for seed in 0..5 {
        let x = tensor(&[2; 12], 2000 + seed);
        for eps in [1e-1, 1e-3, 1e-8] {
            let spec = TruncationSpec::accuracy(eps);
            for tt in [
                tt_svd_reference(&x, &spec).unwrap(),
                tt_svd_tsqr(&x, &spec).unwrap(),
                tt_svd_thick_bounds(&x, &spec, &ThickBoundsParams::default()).unwrap(),
                tt_svd_two_sided(&x, &spec, &ThickBoundsParams::default()).unwrap(),
            ] {
                trials += 1;
                worst_slack = worst_slack.max(tt_error(&x, &tt).unwrap() - eps);
            }
        }
    }
    outcome(
        worst_slack <= 1e-10,
        format!("{trials} trials, max(error - eps) = {worst_slack:.3e}"),
    )
}

fn synthetic_train(dims: &[usize], ranks: &[usize], seed: u64) -> TensorTrain {
    let cores = dims
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let len = ranks[i] * n * ranks[i + 1];
            TTCore::new(ranks[i], n, ranks[i + 1], uniform(len, seed + i as u64)).unwrap()
        })
        .collect();
    TensorTrain::new(cores).unwrap()
}

fn c3_constructive_recovery() -> Outcome {
    // The rank list has five cores; it is run on 4^5 as listed and padded
    // with one more rank-3 bond on 4^6.
    let cases: [(&[usize], &[usize]); 2] = [(&[4; 5], &[1, 2, 3, 3, 2, 1]), (&[4; 6], &[1, 2, 3, 3, 3, 2, 1])];
    let mut ok = true;
    let mut detail = Vec::new();
    for (dims, ranks) in cases {
        let x = tt_reconstruct(&synthetic_train(dims, ranks, 3000)).unwrap();
        let tt = tt_svd_tsqr(&x, &TruncationSpec::new(3, 0.0)).unwrap();
        let e = tt_error(&x, &tt).unwrap();
        ok &= tt.ranks() == ranks && e <= 1e-12;
        detail.push(format!("{} ranks {:?} error {e:.1e}", dims.len(), tt.ranks()));
    }
    outcome(ok, detail.join("; "))
}

/// `X^T X` with blocked partial sums as an independent oracle.
fn gram(x: MatRef<'_>) -> Vec<f64> {
    let m = x.cols();
    let mut g = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let (ca, cb) = (x.col(a), x.col(b));
            let s: f64 = ca
                .chunks(256)
                .zip(cb.chunks(256))
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| u * v).sum::<f64>())
                .sum();
            g[a + m * b] = s;
            g[b + m * a] = s;
        }
    }
    g
}

fn c4_gram_property() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut largest = (0, 0);
    for trial in 0..200u64 {
        let r = uniform(3, 4000 + trial);
        let (n, m) = if trial == 0 {
            (1_000_000, 32)
        } else {
            let m = 1 + ((r[0] + 0.5) * 32.0) as usize % 32;
            let n = (m as f64 * (1_000_000.0 / m as f64).powf(r[1] + 0.5)) as usize;
            (n.max(m), m)
        };
        let vals = uniform(n * m, 5000 + trial);
        let mut x = PaddedMatrix::from_col_major(n, m, &vals).unwrap();
        match trial % 4 {
            // zero columns
            1 => {
                for i in 0..n {
                    x.set(i, 0, 0.0);
                    x.set(i, m - 1, 0.0);
                }
            }
            // duplicated and dependent columns
            2 if m > 1 => {
                for i in 0..n {
                    let v = x.get(i, 0);
                    for j in (1..m).step_by(2) {
                        x.set(i, j, v * j as f64);
                    }
                }
            }
            3 if trial % 8 == 3 => x = PaddedMatrix::zeros(n, m),
            _ => {}
        }
        let workers = 1 + trial as usize % 4;
        let rf = tsqr(x.as_ref(), &BlockParams::for_columns(m), workers).unwrap();
        if rf.as_slice().iter().any(|v| !v.is_finite()) {
            failures += 1;
            continue;
        }
        let (g, h) = (gram(x.as_ref()), rf.gram());
        let num = g.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let res = if den > 0.0 { num / den } else { num };
        worst = worst.max(res);
        if res > 1e-12 {
            failures += 1;
        }
        if n * m > largest.0 * largest.1 {
            largest = (n, m);
        }
    }
    outcome(
        failures == 0,
        format!(
            "200 trials up to {}x{}, worst residual {worst:.2e}, {failures} failures",
            largest.0, largest.1
        ),
    )
}

/// `n x m` matrix with singular values `s` and random singular vectors.
fn with_spectrum(n: usize, s: &[f64], seed: u64) -> PaddedMatrix {
    let orth = |rows: usize, cols: usize, seed: u64| {
        let raw = uniform(rows * cols, seed);
        let mut q: Vec<Vec<f64>> = Vec::new();
        for c in 0..cols {
            let mut x = raw[c * rows..(c + 1) * rows].to_vec();
            for _ in 0..2 {
                for v in &q {
                    let g: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= g * vi);
                }
            }
            let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            q.push(x.into_iter().map(|a| a / nrm).collect());
        }
        q
    };
    let m = s.len();
    let u = orth(n, m, seed);
    let v = orth(m, m, seed + 1);
    PaddedMatrix::from_fn(n, m, |i, j| (0..m).map(|k| u[k][i] * s[k] * v[k][j]).sum())
}

fn c5_singular_values() -> Outcome {
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let m = 2 + (trial as usize * 7) % 31;
        let n = 500 + 397 * trial as usize;
        let kappa = 10f64.powf(6.0 * (trial % 10) as f64 / 9.0);
        let s: Vec<f64> = (0..m).map(|k| kappa.powf(-(k as f64) / (m - 1) as f64)).collect();
        let x = with_spectrum(n, &s, 6000 + 2 * trial);
        let r = tsqr(x.as_ref(), &BlockParams::for_columns(m), 2).unwrap();
        let a = small_svd(&r).unwrap().sigma;
        let b = jacobi_svd(x.as_ref()).unwrap().sigma;
        for k in 0..m {
            worst = worst.max(rel(a[k], b[k]));
        }
    }
    outcome(worst <= 1e-10, format!("50 trials, kappa up to 1e6, worst relative gap {worst:.2e}"))
}

fn c6_cost_model() -> Outcome {
    let p = MachineProfile::default();
    let mut ok = true;
    let mut detail = Vec::new();
    let n30 = (1u64 << 30) as f64;
    for (name, f, r, flops, bytes) in [
        ("plain r=1", 0.5, 1.0, 13e9, 43e9),
        ("thick f=1/16 r=1", 1.0 / 16.0, 1.0, 39e9, 19e9),
        ("thick f=1/2 r=31", 0.5, 31.0, 399e9, 43e9),
    ] {
        let fl = ttsvd_flops_estimate(n30, r, f).unwrap();
        let v = ttsvd_volume_estimate(n30, f).unwrap();
        let good = rel(fl, flops) <= 0.01 && rel(v, bytes) <= 0.01;
        ok &= good;
        detail.push(format!("{name}: {:.1} GFlop {:.1} GByte", fl / 1e9, v / 1e9));
    }
    // The CLI model reports the same estimates.
    for (variant, f1, r, flops) in [(Variant::Tsqr, 1.0, 1, 13e9), (Variant::Thick, 1.0 / 16.0, 1, 39e9), (Variant::Thick, 0.5, 31, 399e9)] {
        let tp = ThickBoundsParams {
            f1_min: f1,
            ..Default::default()
        };
        let m = model(&[2; 30], variant, Some(r), &tp, None, &p).unwrap();
        ok &= m.estimate.map_or(false, |e| rel(e.n_flops, flops) <= 0.01);
    }

    // Desk scale: instrumented counters against the per-step model and the
    // closed-form bounds.
    let dims = vec![2; 20];
    let x = tensor(&dims, 7000);
    let n20 = x.numel() as f64;
    let cfg = ExecConfig::with_workers(1);
    for (name, thick, f1, r) in [("plain r=1", false, 0.5, 1), ("thick f=1/16 r=1", true, 1.0 / 16.0, 1), ("thick f=1/2 r=31", true, 0.5, 31)] {
        let spec = TruncationSpec::new(r, 0.0);
        let tp = ThickBoundsParams {
            f1_min: f1,
            ..Default::default()
        };
        let mut log = RunLog::default();
        let k = if thick {
            tt_svd_thick_bounds_with(&x, &spec, &tp, &cfg, &mut log).unwrap();
            choose_combined_dims(&dims, r, &tp)
        } else {
            tt_svd_tsqr_with(&x, &spec, &cfg, &mut log).unwrap();
            1
        };
        let c = log.counters();
        let sm = per_step_model(&dims, &predicted_ranks(&dims, r), k, None).unwrap();
        let bf = ttsvd_flops_estimate(n20, r as f64, f1).unwrap();
        let bv = ttsvd_volume_estimate(n20, f1).unwrap();
        let (cf, cb) = (c.flops as f64, c.bytes as f64);
        let model_gap = rel(cf, sm.total.n_flops).max(rel(cb, sm.total.v_bytes));
        let bound_gap = rel(cf, bf).max(rel(cb, bv));
        ok &= model_gap <= 0.10 && bound_gap <= 0.20;
        detail.push(format!("2^20 {name}: vs model {:.1}%, vs bound {:.1}%", 100.0 * model_gap, 100.0 * bound_gap));
    }
    outcome(ok, detail.join("; "))
}

fn c7_rank_table() -> Outcome {
    let x = tensor(&[2; 16], 8000);
    let mut log = RunLog::default();
    let tt = tt_svd_tsqr_with(&x, &TruncationSpec::new(5, 0.0), &ExecConfig::default(), &mut log).unwrap();
    let ranks = tt.ranks();
    let tail = &ranks[ranks.len() - 5..ranks.len() - 1];
    let f = log.reductions();
    let tp = ThickBoundsParams::default();
    let m = |r: usize| {
        let k = choose_combined_dims(&[2; 16], r, &tp);
        1usize << k
    };
    let ok = tail == [5, 5, 4, 2] && f[..4] == [1.0, 1.0, 0.625, 0.5] && m(1) == 16 && m(16) == 32;
    outcome(
        ok,
        format!("ranks ...{tail:?}, factors {:?}, m(1) = {}, m(16) = {}", &f[..4], m(1), m(16)),
    )
}

fn c8_distributed() -> Outcome {
    let parts: Vec<DenseTensor> = (0..4).map(|k| tensor(&[2; 12], 9000 + k)).collect();
    let mut dims = vec![4];
    dims.extend([2; 12]);
    let cols: Vec<Vec<f64>> = parts.iter().map(|p| p.to_col_major()).collect();
    let mut all = Vec::with_capacity(4 * cols[0].len());
    for i in 0..cols[0].len() {
        all.extend(cols.iter().map(|c| c[i]));
    }
    let x = DenseTensor::from_col_major(Shape::new(dims).unwrap(), &all).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (r, eps) in [(8, 0.0), (usize::MAX, 1e-1), (3, 1e-2)] {
        let spec = TruncationSpec::new(r, eps);
        let dist = tt_svd_distributed(&parts, &spec).unwrap();
        let single = tt_svd_tsqr(&x, &spec).unwrap();
        let shared = dist.partition_cores.iter().all(|c| c == &dist.partition_cores[0]);
        let (a, b) = (tt_error(&x, &dist.tt).unwrap(), tt_error(&x, &single).unwrap());
        let good = dist.tt.ranks() == single.ranks() && same_error(a, b) && shared;
        ok &= good;
        detail.push(format!("r={} eps={eps}: {}", if r == usize::MAX { "inf".into() } else { r.to_string() }, if good { "match" } else { "differ" }));
    }
    outcome(ok, detail.join("; "))
}

fn c9_performance() -> Outcome {
    let x = tensor(&[2; 24], 10_000);
    let mut warnings = Vec::new();
    match host_checks(&x, 1, &mut warnings) {
        Ok(h) => {
            let worst = h.tsqr.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
            outcome(
                warnings.is_empty(),
                format!(
                    "copy {:.2} GByte/s, TSQR m<=16 at least {:.0}% of it, thick rank-1 {:.1}x one copy{}",
                    h.copy_gbytes_per_s,
                    100.0 * worst,
                    h.thick_copy_ratio,
                    if warnings.is_empty() { String::new() } else { format!("; warnings: {}", warnings.join("; ")) }
                ),
            )
        }
        Err(e) => outcome(false, format!("host checks failed to run: {e}")),
    }
}

fn c10_determinism() -> Outcome {
    let x = tensor(&[4, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2], 11_000);
    let mut ok = true;
    let mut detail = Vec::new();
    for v in [Variant::Reference, Variant::Tsqr, Variant::Thick, Variant::TwoSided, Variant::Distributed] {
        let mut p = RunParams::new(x.dims().to_vec(), v);
        p.r_max = Some(6);
        p.eps = 1e-3;
        p.threads = 2;
        p.partitions = 2;
        p.seed = 1;
        let a = run(&x, &p).unwrap();
        let b = run(&x, &p).unwrap();
        let rows = |o: &ttsvd_bench::run::RunOutput| {
            rows_from_log(v.as_str(), "s", p.r_max, p.eps, &o.log)
                .into_iter()
                .map(|r| (r.step, r.phase, r.flops, r.bytes, r.rank))
                .collect::<Vec<_>>()
        };
        let same = a.tt == b.tt && rows(&a) == rows(&b);
        ok &= same;
        if !same {
            detail.push(format!("{} differs", v.as_str()));
        }
    }
    outcome(ok, if detail.is_empty() { "5 variants bitwise reproducible".into() } else { detail.join("; ") })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, bool); 10] = [
        ("oracle equivalence", c1_oracle_equivalence, true),
        ("error guarantee", c2_error_guarantee, true),
        ("constructive recovery", c3_constructive_recovery, true),
        ("TSQR Gram property", c4_gram_property, true),
        ("singular-value agreement", c5_singular_values, true),
        ("cost model", c6_cost_model, true),
        ("rank and reduction table", c7_rank_table, true),
        ("distributed equivalence", c8_distributed, true),
        ("host performance (warning only)", c9_performance, false),
        ("determinism", c10_determinism, true),
    ];
    let mut failed = Vec::new();
    for (i, (name, f, counted)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let tag = match (o.pass, counted) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!("criterion {:>2} {tag} {name} [{:.1} s]: {}", i + 1, t.elapsed().as_secs_f64(), o.detail);
        if !o.pass && *counted {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
