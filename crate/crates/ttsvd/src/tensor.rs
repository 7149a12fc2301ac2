//! Dense column-major tensors with padded leading stride.
//!
//! A tensor of shape `(n_1, ..., n_d)` is stored as its natural matricization
//! `(n_1 ... n_{d-1}) x n_d`. Columns are `leading_stride` elements apart and
//! the stride is padded to an odd multiple of 64 elements so that consecutive
//! columns never alias in set-associative caches. Padded slots are zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Padding quantum in elements.
pub const PADDING_QUANTUM: usize = 64;

/// Largest supported element count.
pub const MAX_ELEMENTS: usize = 1 << 40;

/// Memory budget used by the allocating constructors unless overridden.
pub const DEFAULT_MEMORY_BUDGET: usize = 32 << 30;

/// Smallest `s >= n` with `s = 64 * (2l + 1)`.
pub fn padded_stride(n: usize) -> usize {
    let mut q = n.div_ceil(PADDING_QUANTUM).max(1);
    if q % 2 == 0 {
        q += 1;
    }
    q * PADDING_QUANTUM
}

pub(crate) fn check_budget(elements: usize, budget: usize) -> Result<()> {
    let requested = elements as u128 * 8;
    if requested > budget as u128 {
        return Err(Error::Allocation {
            requested,
            budget: budget as u128,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("shape must have at least one dimension".into()));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(Error::Shape(format!("dimension {} has extent 0", i + 1)));
        }
        let mut total: usize = 1;
        for &n in &dims {
            total = total
                .checked_mul(n)
                .filter(|&t| t <= MAX_ELEMENTS)
                .ok_or_else(|| Error::Shape(format!("{} dimensions with more than 2^40 elements", dims.len())))?;
        }
        Ok(Self(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Rows and columns of the natural matricization. A 1-d tensor is a column.
    pub fn leading_dims(&self) -> (usize, usize) {
        let d = self.ndim();
        if d == 1 {
            (self.0[0], 1)
        } else {
            (self.0[..d - 1].iter().product(), self.0[d - 1])
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ColMap {
    group: usize,
    inner: usize,
    outer: usize,
}

impl ColMap {
    fn strided(cols: usize, stride: usize) -> Self {
        Self {
            group: cols.max(1),
            inner: stride,
            outer: stride * cols.max(1),
        }
    }

    #[inline]
    fn offset(&self, j: usize) -> usize {
        (j % self.group) * self.inner + (j / self.group) * self.outer
    }
}

/// Borrowed column-major matrix.
///
/// Columns are contiguous. Column `j` starts at
/// `(j % group) * inner + (j / group) * outer`, which covers ordinary strided
/// matrices as well as reshapes of a padded tensor that merge dimensions
/// across the padding.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    map: ColMap,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize, stride: usize) -> Result<Self> {
        let map = ColMap::strided(cols, stride);
        Self::with_map(data, rows, cols, map)
    }

    fn with_map(data: &'a [f64], rows: usize, cols: usize, map: ColMap) -> Result<Self> {
        if map.inner < rows && cols > 1 {
            return Err(Error::Layout(format!("stride {} < rows {rows}", map.inner)));
        }
        if cols > 0 && rows > 0 && map.offset(cols - 1) + rows > data.len() {
            return Err(Error::Layout(format!(
                "{rows}x{cols} view does not fit in buffer of {} elements",
                data.len()
            )));
        }
        Ok(Self {
            data,
            rows,
            cols,
            map,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column stride, if columns are equally spaced.
    pub fn stride(&self) -> Option<usize> {
        if self.map.group >= self.cols || self.map.outer == self.map.inner * self.map.group {
            Some(self.map.inner)
        } else if self.map.group == 1 {
            Some(self.map.outer)
        } else {
            None
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &'a [f64] {
        let o = self.map.offset(j);
        &self.data[o..o + self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.col(j)[i]
    }

    pub fn to_padded(&self) -> PaddedMatrix {
        let mut out = PaddedMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            out.col_mut(j).copy_from_slice(self.col(j));
        }
        out
    }

    pub fn to_col_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            out.extend_from_slice(self.col(j));
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Mutable strided view.
#[derive(Debug)]
pub struct MatMut<'a> {
    data: &'a mut [f64],
    rows: usize,
    cols: usize,
    stride: usize,
}

impl<'a> MatMut<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.col(j)[i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.col_mut(j)[i] = v;
    }
}

/// Owned column-major matrix with padded stride.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<f64>,
}

impl PaddedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = padded_stride(rows);
        Self {
            rows,
            cols,
            stride,
            data: vec![0.0; stride * cols],
        }
    }

    pub fn zeros_in(rows: usize, cols: usize, budget: usize) -> Result<Self> {
        check_budget(padded_stride(rows).saturating_mul(cols), budget)?;
        Ok(Self::zeros(rows, cols))
    }

    pub fn from_col_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            out.col_mut(j)
                .copy_from_slice(&values[j * rows..(j + 1) * rows]);
        }
        Ok(out)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            for (i, x) in out.col_mut(j).iter_mut().enumerate() {
                *x = f(i, j);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Full buffer including padding.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.stride + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.stride + i] = v;
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            map: ColMap::strided(self.cols, self.stride),
        }
    }

    pub fn as_mut(&mut self) -> MatMut<'_> {
        MatMut {
            data: &mut self.data,
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
        }
    }

    pub fn to_col_major(&self) -> Vec<f64> {
        self.as_ref().to_col_major()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.as_ref().frobenius_norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    stride: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::zeros_in(shape, DEFAULT_MEMORY_BUDGET)
    }

    pub fn zeros_in(shape: Shape, budget: usize) -> Result<Self> {
        let (rows, cols) = shape.leading_dims();
        let stride = padded_stride(rows);
        let len = stride
            .checked_mul(cols)
            .ok_or_else(|| Error::Shape(format!("{shape} overflows the address space")))?;
        check_budget(len, budget)?;
        Ok(Self {
            shape,
            stride,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor from its entries in column-major order.
    pub fn from_col_major(shape: Shape, values: &[f64]) -> Result<Self> {
        if values.len() != shape.numel() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for shape {shape}",
                values.len()
            )));
        }
        let mut t = Self::zeros(shape)?;
        let (rows, cols) = t.shape.leading_dims();
        for j in 0..cols {
            t.data[j * t.stride..j * t.stride + rows]
                .copy_from_slice(&values[j * rows..(j + 1) * rows]);
        }
        Ok(t)
    }

    pub(crate) fn from_raw(shape: Shape, stride: usize, data: Vec<f64>) -> Result<Self> {
        let (rows, cols) = shape.leading_dims();
        if stride < rows || data.len() != stride * cols {
            return Err(Error::Layout(format!(
                "buffer of {} elements with stride {stride} does not hold shape {shape}",
                data.len()
            )));
        }
        Ok(Self { shape, stride, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn ndim(&self) -> usize {
        self.shape.ndim()
    }

    pub fn numel(&self) -> usize {
        self.shape.numel()
    }

    pub fn leading_stride(&self) -> usize {
        self.stride
    }

    /// Full buffer including padding.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_col_major(&self) -> Vec<f64> {
        self.leading_matrix().to_col_major()
    }

    fn offset(&self, index: &[usize]) -> usize {
        let dims = self.dims();
        assert_eq!(index.len(), dims.len(), "index rank mismatch");
        let d = dims.len();
        let lead = if d == 1 { 1 } else { d - 1 };
        let mut off = 0;
        for i in (0..lead).rev() {
            assert!(index[i] < dims[i], "index out of bounds");
            off = off * dims[i] + index[i];
        }
        if d > 1 {
            assert!(index[d - 1] < dims[d - 1], "index out of bounds");
            off += index[d - 1] * self.stride;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], v: f64) {
        let o = self.offset(index);
        self.data[o] = v;
    }

    pub fn leading_matrix(&self) -> MatRef<'_> {
        let (rows, cols) = self.shape.leading_dims();
        MatRef {
            data: &self.data,
            rows,
            cols,
            map: ColMap::strided(cols, self.stride),
        }
    }

    fn split_dims(&self, split_after: usize) -> Result<(usize, usize, usize)> {
        let dims = self.dims();
        let d = dims.len();
        if split_after == 0 || split_after > d {
            return Err(Error::Shape(format!(
                "split after {split_after} is invalid for a {d}-d tensor"
            )));
        }
        let rows: usize = dims[..split_after].iter().product();
        let cols = self.numel() / rows;
        // Columns that live inside one padded column of the natural layout.
        let inner = if d == 1 {
            1
        } else {
            dims[split_after.min(d - 1)..d - 1].iter().product()
        };
        Ok((rows, cols, inner))
    }

    fn unpadded(&self) -> bool {
        self.shape.leading_dims().0 == self.stride || self.shape.leading_dims().1 == 1
    }

    /// Zero-copy `(n_1 ... n_p) x (n_{p+1} ... n_d)` view with a single
    /// column stride. Fails with [`Error::Layout`] when padding makes the split
    /// unrepresentable; use [`DenseTensor::matricize`] or
    /// [`DenseTensor::reshape_copy`] instead.
    pub fn reshape_view(&self, split_after: usize) -> Result<MatRef<'_>> {
        let (rows, cols, stride) = self.single_stride(split_after)?;
        MatRef::new(&self.data, rows, cols, stride)
    }

    pub fn reshape_view_mut(&mut self, split_after: usize) -> Result<MatMut<'_>> {
        let (rows, cols, stride) = self.single_stride(split_after)?;
        Ok(MatMut {
            data: &mut self.data,
            rows,
            cols,
            stride,
        })
    }

    fn single_stride(&self, split_after: usize) -> Result<(usize, usize, usize)> {
        let (rows, cols, inner) = self.split_dims(split_after)?;
        let d = self.ndim();
        if d == 1 || (split_after < d && inner == 1) {
            let (lr, _) = self.shape.leading_dims();
            if rows == lr {
                return Ok((rows, cols, self.stride));
            }
        }
        if self.unpadded() {
            return Ok((rows, cols, rows));
        }
        if split_after < d && self.dims()[d - 1] == 1 {
            return Ok((rows, cols, rows));
        }
        Err(Error::Layout(format!(
            "split after {split_after} of {} crosses padding (stride {})",
            self.shape, self.stride
        )))
    }

    /// Zero-copy matricization at any split point that keeps the row index
    /// inside one padded column.
    pub fn matricize(&self, split_after: usize) -> Result<MatRef<'_>> {
        let (rows, cols, inner) = self.split_dims(split_after)?;
        let d = self.ndim();
        if split_after == d && d > 1 && !self.unpadded() {
            return Err(Error::Layout(format!(
                "column vector view of {} crosses padding",
                self.shape
            )));
        }
        if split_after == d {
            return MatRef::new(&self.data, rows, 1, rows.max(self.stride));
        }
        let map = ColMap {
            group: inner,
            inner: rows,
            outer: self.stride,
        };
        MatRef::with_map(&self.data, rows, cols, map)
    }

    pub fn reshape_copy(&self, split_after: usize) -> Result<PaddedMatrix> {
        let (rows, cols, _) = self.split_dims(split_after)?;
        PaddedMatrix::from_col_major(rows, cols, &self.to_col_major())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.leading_matrix().frobenius_norm()
    }
}

/// Tensor with i.i.d. entries uniform on `[0, 1)`.
///
/// Column `j` of the natural matricization is drawn from ChaCha stream `j`, so
/// the result does not depend on the thread count.
pub fn random_tensor(shape: &Shape, seed: u64) -> Result<DenseTensor> {
    random_tensor_in(shape, seed, DEFAULT_MEMORY_BUDGET)
}

pub fn random_tensor_in(shape: &Shape, seed: u64, budget: usize) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros_in(shape.clone(), budget)?;
    let (rows, _) = shape.leading_dims();
    let stride = t.stride;
    t.data
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(j, col)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            rng.set_word_pos(0);
            for x in &mut col[..rows] {
                *x = rng.gen::<f64>();
            }
        });
    Ok(t)
}
