use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttsvd::{
    derive_delta, jacobi_svd, random_tensor, select_rank, small_svd, tsqr, BlockParams, PaddedMatrix, Shape,
    TriangularFactor,
};

/// Matrix `U diag(s) V^T` with random orthonormal `U`, `V` from Gram-Schmidt.
fn with_spectrum(n: usize, s: &[f64], seed: u64) -> PaddedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orth = |rows: usize, cols: usize| {
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < cols {
            let mut x: Vec<f64> = (0..rows).map(|_| rng.gen::<f64>() - 0.5).collect();
            for _ in 0..2 {
                for c in &q {
                    let g: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(c).for_each(|(xi, ci)| *xi -= g * ci);
                }
            }
            let n: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            q.push(x.into_iter().map(|a| a / n).collect());
        }
        q
    };
    let m = s.len();
    let u = orth(n, m);
    let v = orth(m, m);
    PaddedMatrix::from_fn(n, m, |i, j| (0..m).map(|k| u[k][i] * s[k] * v[k][j]).sum())
}

fn orthonormality(q: &[f64], m: usize, cols: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..cols {
        for b in 0..cols {
            let g: f64 = (0..m).map(|i| q[i + m * a] * q[i + m * b]).sum();
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

#[test]
fn qr_trick_preserves_singular_values() {
    for trial in 0..10 {
        let m = 2 + trial % 7;
        let s: Vec<f64> = (0..m).map(|k| 10f64.powf(-6.0 * k as f64 / (m - 1) as f64)).collect();
        let x = with_spectrum(3000, &s, trial as u64);
        let r = tsqr(x.as_ref(), &BlockParams::for_columns(m), 2).unwrap();
        let a = small_svd(&r).unwrap().sigma;
        let b = jacobi_svd(x.as_ref()).unwrap().sigma;
        for k in 0..m {
            assert!((a[k] - b[k]).abs() <= 1e-10 * b[k], "trial {trial} k {k}: {} vs {}", a[k], b[k]);
            assert!((a[k] - s[k]).abs() <= 1e-9 * s[k]);
        }
    }
}

#[test]
fn factor_with_few_significant_rows() {
    let mut data = vec![0.0; 36];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for j in 0..6 {
        data[6 * j] = rng.gen::<f64>() + 0.1;
        if j > 0 {
            data[1 + 6 * j] = rng.gen::<f64>();
        }
    }
    data[35] = 1e-160;
    let r = TriangularFactor::from_upper(6, data.clone()).unwrap();
    let s = small_svd(&r).unwrap();
    assert!(s.sigma[2..].iter().all(|&x| x == 0.0));
    assert!(orthonormality(&s.u_bar, 6, 6) < 1e-14);
    assert!(orthonormality(&s.v, 6, 6) < 1e-14);
    for i in 0..6 {
        for j in 0..6 {
            let y: f64 = (0..6).map(|k| s.u_bar[i + 6 * k] * s.sigma[k] * s.v[j + 6 * k]).sum();
            assert!((y - data[i + 6 * j]).abs() < 1e-14);
        }
    }
}

#[test]
fn first_step_norm_matches_tensor_norm() {
    let x = random_tensor(&Shape::new(vec![2; 12]).unwrap(), 3).unwrap();
    let w = x.leading_matrix();
    let r = tsqr(w, &BlockParams::for_columns(2), 1).unwrap();
    let s = small_svd(&r).unwrap().sigma;
    let norm = s.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!((norm - x.frobenius_norm()).abs() <= 1e-12 * norm);
    assert_eq!(derive_delta(norm, 0.0, 12).unwrap(), 0.0);
    assert!((derive_delta(2.0, 0.1, 5).unwrap() - 0.1).abs() < 1e-15);
}

proptest! {
    #[test]
    fn rank_is_monotone(
        mut s in prop::collection::vec(0.0f64..10.0, 1..20),
        d1 in 0.0f64..10.0, d2 in 0.0f64..10.0,
        r1 in 1usize..25, r2 in 1usize..25,
    ) {
        s.sort_by(|a, b| b.total_cmp(a));
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        prop_assert!(select_rank(&s, hi, r1) <= select_rank(&s, lo, r1));
        let (rl, rh) = (r1.min(r2), r1.max(r2));
        prop_assert!(select_rank(&s, lo, rh) >= select_rank(&s, lo, rl));
        let r = select_rank(&s, lo, usize::MAX);
        let tail: f64 = s[r..].iter().map(|x| x * x).sum();
        prop_assert!(r == 1 || tail <= lo * lo);
    }

    #[test]
    fn small_svd_factorizes(m in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..=j {
                data[i + m * j] = rng.gen::<f64>() - 0.5;
            }
        }
        let r = TriangularFactor::from_upper(m, data.clone()).unwrap();
        let s = small_svd(&r).unwrap();
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(orthonormality(&s.u_bar, m, m) < 1e-13);
        prop_assert!(orthonormality(&s.v, m, m) < 1e-13);
        for i in 0..m {
            for j in 0..m {
                let y: f64 = (0..m).map(|k| s.u_bar[i + m * k] * s.sigma[k] * s.v[j + m * k]).sum();
                prop_assert!((y - data[i + m * j]).abs() < 1e-13);
            }
        }
    }
}
