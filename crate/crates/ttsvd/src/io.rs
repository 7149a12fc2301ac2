//! Raw little-endian dumps of tensors and tensor trains.
//!
//! Tensor: `d, n_1..n_d, stride` as `u64`, then the padded buffer as `f64`.
//! Train: `d, r_0..r_d, n_1..n_d` as `u64`, then each core buffer as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};
use crate::ttsvd::{TTCore, TensorTrain};

fn put_u64(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn put_f64s(w: &mut impl Write, vals: &[f64]) -> Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Parse("header value overflows usize".into()))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn get_header(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    (0..n).map(|_| get_u64(r)).collect()
}

fn check_order(d: usize) -> Result<usize> {
    if d == 0 || d > 64 {
        return Err(Error::Parse(format!("implausible tensor order {d}")));
    }
    Ok(d)
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    put_u64(w, t.ndim())?;
    for &n in t.dims() {
        put_u64(w, n)?;
    }
    put_u64(w, t.leading_stride())?;
    put_f64s(w, t.data())
}

pub fn read_tensor(r: &mut impl Read) -> Result<DenseTensor> {
    let d = check_order(get_u64(r)?)?;
    let dims = get_header(r, d)?;
    let stride = get_u64(r)?;
    let shape = Shape::new(dims)?;
    let (_, cols) = shape.leading_dims();
    let len = stride
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse("buffer size overflows".into()))?;
    let data = get_f64s(r, len)?;
    DenseTensor::from_raw(shape, stride, data)
}

pub fn write_tt(w: &mut impl Write, tt: &TensorTrain) -> Result<()> {
    put_u64(w, tt.ndim())?;
    for r in tt.ranks() {
        put_u64(w, r)?;
    }
    for n in tt.dims() {
        put_u64(w, n)?;
    }
    for c in tt.cores() {
        put_f64s(w, c.data())?;
    }
    Ok(())
}

pub fn read_tt(r: &mut impl Read) -> Result<TensorTrain> {
    let d = check_order(get_u64(r)?)?;
    let ranks = get_header(r, d + 1)?;
    let dims = get_header(r, d)?;
    let cores = (0..d)
        .map(|i| {
            let len = ranks[i]
                .checked_mul(dims[i])
                .and_then(|x| x.checked_mul(ranks[i + 1]))
                .ok_or_else(|| Error::Parse("core size overflows".into()))?;
            TTCore::new(ranks[i], dims[i], ranks[i + 1], get_f64s(r, len)?)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorTrain::new(cores)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

pub fn save_tt(path: impl AsRef<Path>, tt: &TensorTrain) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tt(&mut w, tt)?;
    w.flush()?;
    Ok(())
}

pub fn load_tt(path: impl AsRef<Path>) -> Result<TensorTrain> {
    read_tt(&mut BufReader::new(File::open(path)?))
}
