//! Row-factorizable permanental upper bounds and their deep variants.
//!
//! Each bound is a product of per-row factors `γ(A_i)`:
//!
//! * Minc–Brègman: `γ(|A_i|)` with `γ(k) = (k!)^(1/k)`; valid for 0/1 rows.
//! * Schrijver–Soules: `sum_k a*_ik (γ(k) - γ(k-1))` over the row sorted in
//!   nonincreasing order.
//! * Huber–Law: `h(|A_i|) / e`, valid for rows with entries in `[0, 1]`.
//!   Rows with a larger maximum `c` use `c h(|A_i| / c) / e`, which equals
//!   the bound of the row scaled into `[0, 1]` times the scale.
//!
//! An all-zero row has factor 0, and the empty matrix has bound 1.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::deep_table::{self, DeepTable, TableLimits};
use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::matrix::Matrix;
use crate::special::{ln_factorial, ln_gamma};

/// Relative slack when comparing child-bound sums with the parent bound.
pub const NESTING_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    MincBregman,
    SchrijverSoules,
    HuberLaw,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [
        BoundKind::MincBregman,
        BoundKind::SchrijverSoules,
        BoundKind::HuberLaw,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            BoundKind::MincBregman => "mb",
            BoundKind::SchrijverSoules => "ss",
            BoundKind::HuberLaw => "hl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mb" | "minc-bregman" | "minc" => Some(BoundKind::MincBregman),
            "ss" | "schrijver-soules" | "schrijver" => Some(BoundKind::SchrijverSoules),
            "hl" | "huber-law" | "huber" => Some(BoundKind::HuberLaw),
            _ => None,
        }
    }

    /// The factor `γ(row)` this bound assigns to one row.
    pub fn row_factor(&self, row: &[f64]) -> f64 {
        match self {
            BoundKind::MincBregman => {
                let s: f64 = row.iter().sum();
                gamma_real(s)
            }
            BoundKind::SchrijverSoules => {
                let mut sorted: Vec<f64> = row.iter().copied().filter(|&v| v > 0.0).collect();
                sorted.sort_unstable_by(|a, b| b.total_cmp(a));
                let deltas = ss_deltas(sorted.len());
                sorted.iter().zip(&deltas[1..]).map(|(a, d)| a * d).sum()
            }
            BoundKind::HuberLaw => {
                let s: f64 = row.iter().sum();
                if s == 0.0 {
                    return 0.0;
                }
                let c = row.iter().copied().fold(1.0, f64::max);
                c * h(s / c) / E
            }
        }
    }
}

/// `γ(k) = (k!)^(1/k)` with `γ(0) = 0`.
pub fn gamma_minc(k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        (ln_factorial(k) / k as f64).exp()
    }
}

/// `Γ(x + 1)^(1/x)`, extending [`gamma_minc`] to real row sums.
pub fn gamma_real(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.fract() == 0.0 && x < 1e15 {
        gamma_minc(x as u64)
    } else {
        (ln_gamma(x + 1.0) / x).exp()
    }
}

/// `δ_k = γ(k) - γ(k-1)` for `k in 0..=n`, with `δ_0 = 0`.
pub fn ss_deltas(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut ln_fact = 0.0;
    let mut prev = 0.0;
    for k in 1..=n {
        ln_fact += (k as f64).ln();
        let g = (ln_fact / k as f64).exp();
        out.push(g - prev);
        prev = g;
    }
    out
}

/// The Huber–Law row function.
pub fn h(r: f64) -> f64 {
    if r >= 1.0 {
        r + 0.5 * r.ln() + E - 1.0
    } else {
        1.0 + (E - 1.0) * r
    }
}

/// `U(A)` as a product of row factors.
///
/// Minc–Brègman only bounds matrices with entries in `[0, 1]`; the other two
/// kinds hold for any nonnegative matrix.
pub fn bound(m: &Matrix, kind: BoundKind) -> Result<LogScale> {
    m.order()?;
    Ok(product_of_rows(m, kind, 0..m.rows(), |_| true))
}

fn product_of_rows(
    m: &Matrix,
    kind: BoundKind,
    rows: impl Iterator<Item = usize>,
    keep_col: impl Fn(usize) -> bool,
) -> LogScale {
    let mut ln = 0.0;
    let mut buf = Vec::with_capacity(m.cols());
    for i in rows {
        buf.clear();
        buf.extend((0..m.cols()).filter(|&j| keep_col(j)).map(|j| m.get(i, j)));
        let f = kind.row_factor(&buf);
        if f == 0.0 {
            return LogScale::ZERO;
        }
        ln += f.ln();
    }
    LogScale::from_ln(ln)
}

/// Node bound: product of the fixed entries times the bound of what remains.
pub fn partition_bound(m: &Matrix, fixed: &[(usize, usize)], kind: BoundKind) -> Result<LogScale> {
    let n = m.order()?;
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut picked = LogScale::ONE;
    for &(i, j) in fixed {
        if i >= n || j >= n {
            return Err(Error::Shape(format!("pair ({i}, {j}) outside {n}x{n}")));
        }
        if std::mem::replace(&mut row_used[i], true) {
            return Err(Error::DuplicateIndex(i));
        }
        if std::mem::replace(&mut col_used[j], true) {
            return Err(Error::DuplicateIndex(j));
        }
        picked = picked * LogScale::from_f64(m.get(i, j));
    }
    if picked.is_zero() {
        return Ok(LogScale::ZERO);
    }
    let rest = product_of_rows(m, kind, (0..n).filter(|&i| !row_used[i]), |j| !col_used[j]);
    Ok(picked * rest)
}

/// Bounds `a_ij U(minor_ij)` of the children obtained by branching on column `j`.
pub fn child_bounds(m: &Matrix, kind: BoundKind, j: usize) -> Result<Vec<LogScale>> {
    let n = m.order()?;
    Ok((0..n)
        .map(|i| {
            let a = m.get(i, j);
            if a == 0.0 {
                return LogScale::ZERO;
            }
            let rest = product_of_rows(m, kind, (0..n).filter(|&r| r != i), |c| c != j);
            LogScale::from_f64(a) * rest
        })
        .collect())
}

/// Whether branching on column `j` satisfies `sum_i u(S_ij) <= u(S)`.
pub fn check_nesting(m: &Matrix, kind: BoundKind, j: usize) -> Result<bool> {
    let parent = bound(m, kind)?;
    let sum = child_bounds(m, kind, j)?
        .iter()
        .fold(LogScale::ZERO, |acc, c| acc.add(c));
    if sum.is_zero() {
        return Ok(true);
    }
    if parent.is_zero() {
        return Ok(false);
    }
    Ok(sum.ln() - parent.ln() <= NESTING_TOLERANCE.ln_1p())
}

/// The depth-`d` bound `U_d(A) = sum_I per A_IJ U(A_{Ī J̄})` with
/// `J` the first `d` columns, in the factored form `γ_N · per B`.
#[derive(Clone, Debug)]
pub struct DeepBound {
    pub depth: usize,
    pub kind: BoundKind,
    /// Product of the nonzero outside-`J` row factors.
    pub gamma: LogScale,
    /// `γ_i` for every row; rows with `γ_i = 0` must be matched into `J`.
    pub row_factors: Vec<f64>,
    pub table: DeepTable,
    pub value: LogScale,
}

pub fn deep_bound(m: &Matrix, d: usize, kind: BoundKind) -> Result<DeepBound> {
    deep_bound_with_limits(m, d, kind, TableLimits::default())
}

pub fn deep_bound_with_limits(
    m: &Matrix,
    d: usize,
    kind: BoundKind,
    limits: TableLimits,
) -> Result<DeepBound> {
    let n = m.order()?;
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
    let mut b = Vec::with_capacity(n * d);
    let mut skip = Vec::with_capacity(n);
    let mut row_factors = Vec::with_capacity(n);
    let mut gamma_ln = 0.0;
    for i in 0..n {
        let row = m.row(i);
        let g = kind.row_factor(&row[d..]);
        row_factors.push(g);
        if g > 0.0 {
            gamma_ln += g.ln();
            b.extend(row[..d].iter().map(|a| a / g));
            skip.push(1.0);
        } else {
            b.extend_from_slice(&row[..d]);
            skip.push(0.0);
        }
    }
    let table = deep_table::build(b, skip, n, d)?;
    let gamma = LogScale::from_ln(gamma_ln);
    let value = gamma * LogScale::from_f64(table.value());
    Ok(DeepBound {
        depth: d,
        kind,
        gamma,
        row_factors,
        table,
        value,
    })
}
