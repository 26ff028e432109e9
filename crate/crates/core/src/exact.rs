//! Exact permanents: Glynn's formula in Gray-code order and a brute-force
//! permutation sum used as an independent oracle.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::matrix::Matrix;

/// Largest order `permanent_exact` accepts unless told otherwise.
pub const DEFAULT_EXACT_CAP: usize = 30;
/// Largest order `permanent_bruteforce` accepts.
pub const BRUTEFORCE_CAP: usize = 10;

// Gray-code chunks below this many sign patterns run on one thread.
const PAR_CHUNK_LOG2: u32 = 14;

/// Permanent of a square matrix with the default size cap.
pub fn permanent_exact(m: &Matrix) -> Result<LogScale> {
    permanent_exact_with_cap(m, DEFAULT_EXACT_CAP)
}

/// Glynn's formula with Gray-code updates, `O(2^(n-1) n)` operations.
///
/// Rows are divided by their maxima first and the factors restored in the
/// log domain, so the result does not overflow for large entries.
pub fn permanent_exact_with_cap(m: &Matrix, cap: usize) -> Result<LogScale> {
    let n = m.order()?;
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    if let Some(per) = integer_permanent(m) {
        return Ok(LogScale::from_f64(per));
    }
    let mut scaled = m.clone();
    let mut log_scale = 0.0;
    for i in 0..n {
        let max = m.row_max(i);
        if max == 0.0 {
            return Ok(LogScale::ZERO);
        }
        scaled.scale_row(i, 1.0 / max);
        log_scale += max.ln();
    }
    let sum = glynn_sum(&scaled);
    // Cancellation can leave a tiny negative residue for zero permanents.
    let per = (sum / (1u64 << (n - 1)) as f64).max(0.0);
    Ok(LogScale::from_f64(per) * LogScale::from_ln(log_scale))
}

/// Unscaled Glynn sum for integer matrices small enough that every partial
/// sum is an exactly representable integer.
fn integer_permanent(m: &Matrix) -> Option<f64> {
    let n = m.rows();
    if n == 0 || n > 53 || m.data().iter().any(|v| v.fract() != 0.0) {
        return None;
    }
    // each Glynn term is at most prod_j (column sum), and there are 2^(n-1)
    let log2_terms: f64 = (0..n).map(|j| m.column(j).sum::<f64>().max(1.0).log2()).sum();
    if log2_terms + (n - 1) as f64 > 52.0 {
        return None;
    }
    Some(glynn_sum(m) / (1u64 << (n - 1)) as f64)
}

/// Sum over sign vectors `delta` with `delta_0 = +1` of
/// `prod(delta) * prod_j sum_i delta_i a_ij`.
fn glynn_sum(a: &Matrix) -> f64 {
    let n = a.rows();
    let states: u64 = 1 << (n - 1);
    if states <= 1 << PAR_CHUNK_LOG2 {
        return glynn_range(a, 0, states);
    }
    let chunk = 1u64 << PAR_CHUNK_LOG2;
    (0..states / chunk)
        .into_par_iter()
        .map(|c| glynn_range(a, c * chunk, chunk))
        .sum()
}

/// Gray-code indices `start..start + len`; `start` must be a multiple of `len`
/// or zero.
fn glynn_range(a: &Matrix, start: u64, len: u64) -> f64 {
    let n = a.rows();
    let gray = start ^ (start >> 1);
    // bit b of the Gray code flips the sign of row b + 1
    let mut signs = vec![1.0; n];
    for (b, s) in signs.iter_mut().skip(1).enumerate() {
        if gray >> b & 1 == 1 {
            *s = -1.0;
        }
    }
    let mut sums = vec![0.0; n];
    for (i, &s) in signs.iter().enumerate() {
        for (acc, &v) in sums.iter_mut().zip(a.row(i)) {
            *acc += s * v;
        }
    }
    let mut parity = if gray.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut total = parity * sums.iter().product::<f64>();
    for k in start + 1..start + len {
        let row = k.trailing_zeros() as usize + 1;
        let delta = -2.0 * signs[row];
        signs[row] = -signs[row];
        for (acc, &v) in sums.iter_mut().zip(a.row(row)) {
            *acc += delta * v;
        }
        parity = -parity;
        total += parity * sums.iter().product::<f64>();
    }
    total
}

/// Literal sum over all `n!` permutations of `prod_i a_{i sigma(i)}`.
pub fn permanent_bruteforce(m: &Matrix) -> Result<f64> {
    let n = m.order()?;
    if n > BRUTEFORCE_CAP {
        return Err(Error::TooLarge {
            n,
            cap: BRUTEFORCE_CAP,
        });
    }
    fn walk(m: &Matrix, row: usize, used: &mut [bool], prod: f64) -> f64 {
        if row == m.rows() {
            return prod;
        }
        let mut total = 0.0;
        for j in 0..m.cols() {
            if !used[j] {
                used[j] = true;
                total += walk(m, row + 1, used, prod * m.get(row, j));
                used[j] = false;
            }
        }
        total
    }
    Ok(walk(m, 0, &mut vec![false; n], 1.0))
}
