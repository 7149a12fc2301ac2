use proptest::prelude::*;
use ttsvd::{
    check_orthonormality, random_tensor, tt_error, tt_reconstruct, tt_svd_distributed, tt_svd_reference,
    tt_svd_thick_bounds, tt_svd_tsqr, tt_svd_tsqr_with, tt_svd_two_sided, DenseTensor, ExecConfig, RunLog, Shape,
    TTCore, TensorTrain, ThickBoundsParams, TruncationSpec,
};

fn rand(dims: &[usize], seed: u64) -> DenseTensor {
    random_tensor(&Shape::new(dims.to_vec()).unwrap(), seed).unwrap()
}

/// Relative errors agree to 1e-10, or both are at rounding level.
fn same_error(a: f64, b: f64) -> bool {
    (a <= 1e-12 && b <= 1e-12) || (a - b).abs() <= 1e-10 * a.max(b)
}

fn rank_cap(dims: &[usize], r_max: usize) -> Vec<usize> {
    let d = dims.len();
    (0..=d)
        .map(|i| {
            let l: usize = dims[..i].iter().product();
            let r: usize = dims[i..].iter().product();
            r_max.min(l).min(r)
        })
        .collect()
}

/// Dense contraction of a train straight from its definition.
fn contract_naive(tt: &TensorTrain) -> Vec<f64> {
    let dims = tt.dims();
    let total: usize = dims.iter().product();
    let mut out = vec![0.0; total];
    for (flat, o) in out.iter_mut().enumerate() {
        let mut idx = Vec::with_capacity(dims.len());
        let mut f = flat;
        for &n in &dims {
            idx.push(f % n);
            f /= n;
        }
        let mut v = vec![1.0];
        for (c, &i) in tt.cores().iter().zip(&idx) {
            v = (0..c.r_right())
                .map(|b| (0..c.r_left()).map(|a| v[a] * c.get(a, i, b)).sum())
                .collect();
        }
        *o = v[0];
    }
    out
}

#[test]
fn reconstruct_matches_naive_contraction() {
    let x = rand(&[3, 4, 2, 5], 2);
    let tt = tt_svd_tsqr(&x, &TruncationSpec::new(3, 0.0)).unwrap();
    let y = tt_reconstruct(&tt).unwrap().to_col_major();
    for (a, b) in y.iter().zip(contract_naive(&tt)) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn plain_and_thick_match_reference() {
    let shapes: [&[usize]; 4] = [&[2; 12], &[4; 6], &[8; 4], &[2, 3, 4, 5, 6]];
    let specs = [(1, 0.0), (4, 0.0), (8, 1e-2), (usize::MAX, 1e-1)];
    for (s, dims) in shapes.iter().enumerate() {
        let x = rand(dims, s as u64 + 11);
        for &(r, eps) in &specs {
            let spec = TruncationSpec::new(r, eps);
            let want = tt_svd_reference(&x, &spec).unwrap();
            let e0 = tt_error(&x, &want).unwrap();
            for tt in [
                tt_svd_tsqr(&x, &spec).unwrap(),
                tt_svd_thick_bounds(&x, &spec, &ThickBoundsParams::default()).unwrap(),
            ] {
                assert_eq!(tt.ranks(), want.ranks(), "{dims:?} r={r} eps={eps}");
                assert!(same_error(tt_error(&x, &tt).unwrap(), e0));
            }
        }
    }
}

#[test]
fn two_sided_is_lossless_without_truncation() {
    for dims in [&[2usize; 10][..], &[3, 4, 5, 2], &[8, 8, 8], &[2, 3, 4, 5, 6]] {
        let x = rand(dims, 5);
        let tt = tt_svd_two_sided(&x, &TruncationSpec::new(usize::MAX, 0.0), &ThickBoundsParams::default()).unwrap();
        assert_eq!(tt.ranks(), rank_cap(dims, usize::MAX));
        assert!(tt_error(&x, &tt).unwrap() < 1e-12, "{dims:?}");
    }
}

#[test]
fn two_sided_meets_error_budget() {
    let x = rand(&[2; 12], 4);
    for eps in [1e-1, 1e-3] {
        let tt = tt_svd_two_sided(&x, &TruncationSpec::accuracy(eps), &ThickBoundsParams::disabled()).unwrap();
        assert!(tt_error(&x, &tt).unwrap() <= eps + 1e-10);
    }
}

#[test]
fn odd_order_is_lossless() {
    let x = rand(&[8, 8, 8], 6);
    let spec = TruncationSpec::new(8, 0.0);
    for tt in [
        tt_svd_tsqr(&x, &spec).unwrap(),
        tt_svd_two_sided(&x, &spec, &ThickBoundsParams::disabled()).unwrap(),
    ] {
        assert!(tt_error(&x, &tt).unwrap() <= 1e-12);
    }
}

#[test]
fn cores_are_orthonormal() {
    let x = rand(&[2; 10], 8);
    let spec = TruncationSpec::new(6, 0.0);
    for tt in [
        tt_svd_reference(&x, &spec).unwrap(),
        tt_svd_tsqr(&x, &spec).unwrap(),
        tt_svd_thick_bounds(&x, &spec, &ThickBoundsParams::default()).unwrap(),
    ] {
        assert!(check_orthonormality(&tt, 0) <= 1e-12 * 6.0);
    }
}

#[test]
fn recovers_synthetic_train() {
    let ranks = [1, 2, 3, 3, 2, 1];
    let mut seed = 100;
    let cores: Vec<TTCore> = (0..5)
        .map(|i| {
            seed += 1;
            let t = rand(&[ranks[i] * 4 * ranks[i + 1]], seed);
            TTCore::new(ranks[i], 4, ranks[i + 1], t.to_col_major()).unwrap()
        })
        .collect();
    let truth = TensorTrain::new(cores).unwrap();
    let x = tt_reconstruct(&truth).unwrap();
    let tt = tt_svd_tsqr(&x, &TruncationSpec::new(3, 0.0)).unwrap();
    assert_eq!(tt.ranks(), ranks);
    assert!(tt_error(&x, &tt).unwrap() <= 1e-12);
}

#[test]
fn work_matrix_shrinks_by_reduction_factors() {
    let dims = vec![2; 14];
    let x = rand(&dims, 3);
    let mut log = RunLog::default();
    tt_svd_tsqr_with(&x, &TruncationSpec::new(5, 0.0), &ExecConfig::default(), &mut log).unwrap();
    let mut size = x.numel() as f64;
    for (s, next) in log.steps.iter().zip(log.steps.iter().skip(1)) {
        assert!(s.reduction > 0.0 && s.reduction <= 1.0);
        size *= s.reduction;
        assert_eq!((next.rows * next.cols) as f64, size);
    }
}

#[test]
fn distributed_matches_single_partition() {
    let parts: Vec<DenseTensor> = (0..4).map(|k| rand(&[2; 12], 40 + k)).collect();
    let spec = TruncationSpec::new(8, 0.0);
    let dist = tt_svd_distributed(&parts, &spec).unwrap();
    for c in &dist.partition_cores[1..] {
        assert_eq!(c, &dist.partition_cores[0]);
    }
    let mut dims = vec![4];
    dims.extend([2; 12]);
    let mut all = Vec::new();
    let cols: Vec<Vec<f64>> = parts.iter().map(|p| p.to_col_major()).collect();
    for i in 0..cols[0].len() {
        all.extend(cols.iter().map(|c| c[i]));
    }
    let x = DenseTensor::from_col_major(Shape::new(dims).unwrap(), &all).unwrap();
    let single = tt_svd_tsqr(&x, &spec).unwrap();
    assert_eq!(dist.tt.ranks(), single.ranks());
    assert!(same_error(tt_error(&x, &dist.tt).unwrap(), tt_error(&x, &single).unwrap()));
}

#[test]
fn one_partition_is_plain_sweep() {
    let slab = rand(&[2; 9], 1);
    let spec = TruncationSpec::new(4, 0.0);
    let dist = tt_svd_distributed(std::slice::from_ref(&slab), &spec).unwrap();
    let mut dims = vec![1];
    dims.extend([2; 9]);
    let x = DenseTensor::from_col_major(Shape::new(dims).unwrap(), &slab.to_col_major()).unwrap();
    assert_eq!(dist.tt, tt_svd_tsqr(&x, &spec).unwrap());
}

#[test]
fn worker_count_is_reproducible() {
    let x = rand(&[4; 7], 12);
    let spec = TruncationSpec::new(10, 0.0);
    let cfg = ExecConfig::with_workers(3);
    let a = tt_svd_tsqr_with(&x, &spec, &cfg, &mut RunLog::default()).unwrap();
    let b = tt_svd_tsqr_with(&x, &spec, &cfg, &mut RunLog::default()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_budget_and_rank_cap(
        dims in prop::collection::vec(2usize..5, 2..7),
        r_max in 1usize..9,
        eps in prop_oneof![Just(0.0), Just(1e-3), Just(1e-1), Just(0.5)],
        seed in any::<u64>(),
    ) {
        let x = rand(&dims, seed);
        let spec = TruncationSpec::new(r_max, eps);
        let tt = tt_svd_tsqr(&x, &spec).unwrap();
        let cap = rank_cap(&dims, r_max);
        prop_assert!(tt.ranks().iter().zip(&cap).all(|(r, c)| r <= c));
        let uncapped = tt_svd_tsqr(&x, &TruncationSpec::accuracy(eps)).unwrap();
        prop_assert!(tt_error(&x, &uncapped).unwrap() <= eps + 1e-10);
        let thick = tt_svd_thick_bounds(&x, &spec, &ThickBoundsParams::default()).unwrap();
        prop_assert_eq!(thick.ranks(), tt.ranks());
    }

    #[test]
    fn variants_match_reference(dims in prop::collection::vec(2usize..5, 2..7), r_max in 1usize..6, seed in any::<u64>()) {
        let x = rand(&dims, seed);
        let spec = TruncationSpec::new(r_max, 0.0);
        let want = tt_svd_reference(&x, &spec).unwrap();
        let got = tt_svd_tsqr(&x, &spec).unwrap();
        prop_assert_eq!(got.ranks(), want.ranks());
        prop_assert!(same_error(tt_error(&x, &got).unwrap(), tt_error(&x, &want).unwrap()));
    }
}
