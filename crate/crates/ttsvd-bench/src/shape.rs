//! Shape grammar: tokens joined by `x`, each either `n` or `n^k` (k copies
//! of `n`). `2^27`, `4x4x2` and `3x2^10` are all valid.

use crate::error::{CliError, CliResult};

pub fn parse_shape(s: &str) -> CliResult<Vec<usize>> {
    let bad = |why: &str| CliError::Usage(format!("bad shape {s:?}: {why}"));
    let mut dims = Vec::new();
    for tok in s.trim().split('x') {
        let (base, count) = match tok.split_once('^') {
            Some((b, k)) => (b, k.parse::<usize>().map_err(|_| bad("exponent is not a number"))?),
            None => (tok, 1),
        };
        let n: usize = base.parse().map_err(|_| bad("dimension is not a number"))?;
        if n == 0 {
            return Err(bad("dimensions must be positive"));
        }
        if count > 64 {
            return Err(bad("more than 64 dimensions"));
        }
        dims.extend(std::iter::repeat(n).take(count));
    }
    if dims.is_empty() || dims.len() > 64 {
        return Err(bad("need between 1 and 64 dimensions"));
    }
    Ok(dims)
}

/// Inverse of [`parse_shape`] that folds runs of equal dims.
pub fn format_shape(dims: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < dims.len() {
        let mut j = i;
        while j < dims.len() && dims[j] == dims[i] {
            j += 1;
        }
        parts.push(if j - i > 1 {
            format!("{}^{}", dims[i], j - i)
        } else {
            dims[i].to_string()
        });
        i = j;
    }
    parts.join("x")
}
