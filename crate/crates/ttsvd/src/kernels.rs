//! Vector primitives shared by the kernels.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `dot(v, c)` for four columns in one pass over `v`, with the same
/// summation order as [`dot`].
#[inline]
pub(crate) fn dot4(v: &[f64], c: [&[f64]; 4]) -> [f64; 4] {
    let n = v.len();
    debug_assert!(c.iter().all(|x| x.len() == n));
    let body = n / 4 * 4;
    let mut acc = [[0.0f64; 4]; 4];
    for i in (0..body).step_by(4) {
        let x = &v[i..i + 4];
        for (a, ck) in acc.iter_mut().zip(&c) {
            let y = &ck[i..i + 4];
            a[0] += x[0] * y[0];
            a[1] += x[1] * y[1];
            a[2] += x[2] * y[2];
            a[3] += x[3] * y[3];
        }
    }
    let mut out = [0.0; 4];
    for ((o, a), ck) in out.iter_mut().zip(&acc).zip(&c) {
        let mut s = (a[0] + a[1]) + (a[2] + a[3]);
        for i in body..n {
            s += v[i] * ck[i];
        }
        *o = s;
    }
    out
}

/// `c_k += a_k * v` for four columns in one pass over `v`.
#[inline]
pub(crate) fn axpy4(a: [f64; 4], v: &[f64], c: [&mut [f64]; 4]) {
    let n = v.len();
    let [c0, c1, c2, c3] = c;
    let (c0, c1, c2, c3) = (&mut c0[..n], &mut c1[..n], &mut c2[..n], &mut c3[..n]);
    for i in 0..n {
        let x = v[i];
        c0[i] += a[0] * x;
        c1[i] += a[1] * x;
        c2[i] += a[2] * x;
        c3[i] += a[3] * x;
    }
}

/// Raw pointer that may be shared between rayon workers writing disjoint
/// locations.
#[derive(Clone, Copy)]
pub(crate) struct SyncPtr(*mut f64);

// SAFETY: users only write through the pointer to pairwise disjoint
// locations of a buffer that outlives the parallel section.
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

impl SyncPtr {
    pub(crate) fn new(p: *mut f64) -> Self {
        Self(p)
    }

    #[inline]
    pub(crate) fn get(self) -> *mut f64 {
        self.0
    }
}

/// Dense `a (p x q) * b (q x r)`, all column-major and contiguous.
pub(crate) fn matmul(a: &[f64], p: usize, q: usize, b: &[f64], r: usize) -> Vec<f64> {
    let mut c = vec![0.0; p * r];
    for j in 0..r {
        let cj = &mut c[j * p..(j + 1) * p];
        for l in 0..q {
            let s = b[l + j * q];
            if s != 0.0 {
                axpy(s, &a[l * p..(l + 1) * p], cj);
            }
        }
    }
    c
}
