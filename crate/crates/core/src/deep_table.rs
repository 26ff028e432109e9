//! Subset dynamic program for rectangular permanents and exact sampling of
//! injections from its table.
//!
//! For an `n x d` matrix `B` with column set `J`, `g_i(K)` is the weighted
//! number of injections from `K ⊆ J` into the first `i` rows:
//!
//! ```text
//! g_i(K) = w_i g_{i-1}(K) + sum_{j in K} b_ij g_{i-1}(K \ {j})
//! ```
//!
//! `w_i` is the weight of leaving row `i` unmatched. It is 1 for the plain
//! rectangular permanent; deep bounds use 0 for rows that must be matched.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_DEPTH_CAP: usize = 30;
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Clone, Copy, Debug)]
pub struct TableLimits {
    pub depth_cap: usize,
    pub memory_budget: u64,
}

impl Default for TableLimits {
    fn default() -> Self {
        TableLimits {
            depth_cap: DEFAULT_DEPTH_CAP,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl TableLimits {
    pub fn table_bytes(rows: usize, depth: usize) -> u64 {
        (rows as u64 + 1) * (1u64 << depth) * std::mem::size_of::<f64>() as u64
    }
}

/// All slices `g_0 .. g_n` of the subset recurrence.
#[derive(Clone, Debug)]
pub struct DeepTable {
    rows: usize,
    depth: usize,
    b: Vec<f64>,
    skip: Vec<f64>,
    g: Vec<f64>,
}

impl DeepTable {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn full(&self) -> usize {
        (1usize << self.depth) - 1
    }

    /// `g_i(K)` for `i in 0..=rows` and `K` a bitmask over the columns.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.g[i * (1 << self.depth) + k]
    }

    /// `g_n(J)`, the rectangular permanent.
    pub fn value(&self) -> f64 {
        self.get(self.rows, self.full())
    }

    pub fn bytes(&self) -> u64 {
        TableLimits::table_bytes(self.rows, self.depth)
    }
}

/// Rectangular permanent table of `b` (every row may stay unmatched).
pub fn rper(b: &Matrix) -> Result<DeepTable> {
    rper_weighted(b, &vec![1.0; b.rows()], TableLimits::default())
}

/// Table with per-row weights `skip[i]` for leaving row `i` unmatched.
pub fn rper_weighted(b: &Matrix, skip: &[f64], limits: TableLimits) -> Result<DeepTable> {
    let (n, d) = (b.rows(), b.cols());
    assert_eq!(skip.len(), n);
    if d > n || d > limits.depth_cap {
        return Err(Error::Depth {
            depth: d,
            rows: n,
            cap: limits.depth_cap,
        });
    }
    let required = TableLimits::table_bytes(n, d);
    if required > limits.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: limits.memory_budget,
        });
    }
    build(b.data().to_vec(), skip.to_vec(), n, d)
}

/// Builds the table for an `n x d` row-major `b`; `d == 0` is allowed.
pub(crate) fn build(b: Vec<f64>, skip: Vec<f64>, n: usize, d: usize) -> Result<DeepTable> {
    let width = 1usize << d;
    let mut g = vec![0.0; (n + 1) * width];
    g[0] = 1.0;
    for i in 1..=n {
        let (prev, cur) = g[(i - 1) * width..(i + 1) * width].split_at_mut(width);
        let row = &b[(i - 1) * d..i * d];
        let w = skip[i - 1];
        for k in 0..width {
            let mut acc = w * prev[k];
            let mut rest = k;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                acc += row[j] * prev[k & !(1 << j)];
            }
            cur[k] = acc;
        }
    }
    let table = DeepTable {
        rows: n,
        depth: d,
        b,
        skip,
        g,
    };
    if !table.value().is_finite() {
        return Err(Error::Overflow("rectangular permanent table"));
    }
    Ok(table)
}

/// Draws an injection `tau` from columns into rows with probability
/// `weight(tau) / g_n(J)`, by walking the rows from last to first.
///
/// Returns `tau` as a vector indexed by column; `tau[j]` is the row.
pub fn dsample<R: Rng + ?Sized>(t: &DeepTable, rng: &mut R) -> Result<Vec<usize>> {
    if t.value() <= 0.0 {
        return Err(Error::ZeroPermanent);
    }
    let d = t.depth;
    let mut tau = vec![usize::MAX; d];
    let mut k = t.full();
    let mut i = t.rows;
    while k != 0 {
        debug_assert!(i > 0);
        let total = t.get(i, k);
        let mut u = rng.random::<f64>() * total;
        let row = &t.b[(i - 1) * d..i * d];
        let stay = t.skip[i - 1] * t.get(i - 1, k);
        // the last option with positive mass absorbs rounding
        let mut choice = if stay > 0.0 { Some(None) } else { None };
        if u < stay {
            u = f64::INFINITY;
        } else {
            u -= stay;
        }
        let mut rest = k;
        while rest != 0 && u.is_finite() {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let mass = row[j] * t.get(i - 1, k & !(1 << j));
            if mass > 0.0 {
                choice = Some(Some(j));
                if u < mass {
                    break;
                }
                u -= mass;
            }
        }
        if let Some(j) = choice.expect("row with zero total mass on a positive path") {
            tau[j] = i - 1;
            k &= !(1 << j);
        }
        i -= 1;
    }
    Ok(tau)
}
