//! Per-trial working state and the incremental child-bound computations.
//!
//! Rows and columns of the working submatrix are index sets over the
//! original matrix. Sum-based bounds (Huber–Law, Minc–Brègman) keep the row
//! sums over the free columns; Schrijver–Soules walks each row's columns in
//! a fixed nonincreasing order, skipping fixed columns.

use std::f64::consts::E;

use crate::bounds::{gamma_real, h, ss_deltas, BoundKind};
use crate::matrix::Matrix;

/// Data shared by every trial on one matrix.
#[derive(Clone, Debug)]
pub struct Tables {
    pub(crate) matrix: Matrix,
    pub(crate) kind: BoundKind,
    /// Per row, all columns sorted by nonincreasing entry (ties by index).
    pub(crate) order: Vec<Vec<usize>>,
    pub(crate) deltas: Vec<f64>,
    pub(crate) sums: Vec<f64>,
    pub(crate) nonzero: Vec<u32>,
}

impl Tables {
    pub fn new(matrix: Matrix, kind: BoundKind) -> Self {
        let n = matrix.rows();
        let order = if kind == BoundKind::SchrijverSoules {
            (0..n)
                .map(|i| {
                    let mut cols: Vec<usize> = (0..matrix.cols()).collect();
                    cols.sort_by(|&a, &b| matrix.get(i, b).total_cmp(&matrix.get(i, a)).then(a.cmp(&b)));
                    cols
                })
                .collect()
        } else {
            Vec::new()
        };
        let sums = (0..n).map(|i| matrix.row_sum(i)).collect();
        let nonzero = (0..n)
            .map(|i| matrix.row(i).iter().filter(|&&v| v > 0.0).count() as u32)
            .collect();
        Tables {
            deltas: ss_deltas(matrix.cols()),
            matrix,
            kind,
            order,
            sums,
            nonzero,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }
}

/// `n x n` grid of log child bounds `ln U(f(A, i, j))`; `-inf` off the
/// working submatrix.
#[derive(Clone, Debug)]
pub struct BoundGrid {
    n: usize,
    logs: Vec<f64>,
}

impl BoundGrid {
    fn new(n: usize) -> Self {
        BoundGrid {
            n,
            logs: vec![f64::NEG_INFINITY; n * n],
        }
    }

    pub fn log(&self, i: usize, j: usize) -> f64 {
        self.logs[i * self.n + j]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.log(i, j).exp()
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.logs[i * self.n + j] = v;
    }
}

#[derive(Clone, Debug)]
pub struct SamplerState<'a> {
    t: &'a Tables,
    row_free: Vec<bool>,
    col_free: Vec<bool>,
    free_rows: Vec<usize>,
    free_cols: Vec<usize>,
    sums: Vec<f64>,
    nonzero: Vec<u32>,
    fixed: Vec<(usize, usize)>,
    weight_log: f64,
    /// Arithmetic-step counter for cost measurements.
    pub(crate) cost: u64,
    scratch: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'a> SamplerState<'a> {
    pub fn new(t: &'a Tables) -> Self {
        let n = t.matrix.rows();
        SamplerState {
            t,
            row_free: vec![true; n],
            col_free: vec![true; n],
            free_rows: (0..n).collect(),
            free_cols: (0..n).collect(),
            sums: t.sums.clone(),
            nonzero: t.nonzero.clone(),
            fixed: Vec::with_capacity(n),
            weight_log: 0.0,
            cost: 0,
            scratch: Vec::with_capacity(n),
            prefix: Vec::with_capacity(n + 1),
        }
    }

    /// Back to the root node, reusing allocations.
    pub fn reset(&mut self) {
        let n = self.t.matrix.rows();
        self.row_free.iter_mut().for_each(|f| *f = true);
        self.col_free.iter_mut().for_each(|f| *f = true);
        self.free_rows.clear();
        self.free_rows.extend(0..n);
        self.free_cols.clear();
        self.free_cols.extend(0..n);
        self.sums.clone_from(&self.t.sums);
        self.nonzero.clone_from(&self.t.nonzero);
        self.fixed.clear();
        self.weight_log = 0.0;
        self.cost = 0;
    }

    pub fn free_rows(&self) -> &[usize] {
        &self.free_rows
    }

    pub fn free_cols(&self) -> &[usize] {
        &self.free_cols
    }

    pub fn fixed(&self) -> &[(usize, usize)] {
        &self.fixed
    }

    /// `ln` of the product of fixed entries.
    pub fn weight_log(&self) -> f64 {
        self.weight_log
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.sums[i]
    }

    /// Fix row `i` to column `j`, shrinking the working submatrix.
    pub fn fix(&mut self, i: usize, j: usize) {
        debug_assert!(self.row_free[i] && self.col_free[j]);
        let a = &self.t.matrix;
        self.weight_log += a.get(i, j).ln();
        self.row_free[i] = false;
        self.col_free[j] = false;
        self.free_rows.retain(|&r| r != i);
        self.free_cols.retain(|&c| c != j);
        self.fixed.push((i, j));
        if self.t.kind != BoundKind::SchrijverSoules {
            for &s in &self.free_rows {
                let v = a.get(s, j);
                self.sums[s] -= v;
                if v > 0.0 {
                    self.nonzero[s] -= 1;
                }
            }
            self.cost += self.free_rows.len() as u64;
        }
    }

    /// Undoes the most recent [`fix`](Self::fix).
    pub fn unfix_last(&mut self) -> Option<(usize, usize)> {
        let (i, j) = self.fixed.pop()?;
        let a = &self.t.matrix;
        self.weight_log -= a.get(i, j).ln();
        if self.fixed.is_empty() {
            self.weight_log = 0.0;
        }
        if self.t.kind != BoundKind::SchrijverSoules {
            for &s in &self.free_rows {
                let v = a.get(s, j);
                self.sums[s] += v;
                if v > 0.0 {
                    self.nonzero[s] += 1;
                }
            }
        }
        self.row_free[i] = true;
        self.col_free[j] = true;
        // keep both lists sorted; static column order reads the first free column
        let r = self.free_rows.partition_point(|&x| x < i);
        self.free_rows.insert(r, i);
        let c = self.free_cols.partition_point(|&x| x < j);
        self.free_cols.insert(c, j);
        Some((i, j))
    }

    fn sum_factor_ln(&self, sum: f64, nonzero: u32) -> f64 {
        if nonzero == 0 {
            return f64::NEG_INFINITY;
        }
        let r = sum.max(0.0);
        match self.t.kind {
            BoundKind::HuberLaw => (h(r) / E).ln(),
            BoundKind::MincBregman => gamma_real(snap_integer(r)).ln(),
            BoundKind::SchrijverSoules => unreachable!(),
        }
    }

    /// SS factor of row `s` over the free columns, optionally without `skip`.
    fn ss_factor(&self, s: usize, skip: Option<usize>) -> f64 {
        let a = &self.t.matrix;
        let d = &self.t.deltas;
        let mut k = 0;
        let mut acc = 0.0;
        for &c in &self.t.order[s] {
            if !self.col_free[c] || Some(c) == skip {
                continue;
            }
            let v = a.get(s, c);
            if v == 0.0 {
                break;
            }
            k += 1;
            acc += v * d[k];
        }
        acc
    }

    /// `ln U` of the working submatrix.
    pub fn parent_log(&self) -> f64 {
        match self.t.kind {
            BoundKind::SchrijverSoules => self
                .free_rows
                .iter()
                .map(|&s| self.ss_factor(s, None).ln())
                .sum(),
            _ => self
                .free_rows
                .iter()
                .map(|&s| self.sum_factor_ln(self.sums[s], self.nonzero[s]))
                .sum(),
        }
    }

    /// `ln U(f(A, i, j))` for every free row `i`, for a sum-based bound, in
    /// `O(n)` via prefix and suffix sums of the row-factor logs. Entries are
    /// indexed by original row; fixed rows get `-inf`.
    pub fn hl_column_bounds(&mut self, j: usize) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.t.matrix.rows()];
        self.column_bounds_into(j, |i, v| out[i] = v);
        out
    }

    pub(crate) fn column_bounds_into(&mut self, j: usize, mut emit: impl FnMut(usize, f64)) {
        assert_ne!(self.t.kind, BoundKind::SchrijverSoules);
        let a = &self.t.matrix;
        let mut logs = std::mem::take(&mut self.scratch);
        logs.clear();
        for &s in &self.free_rows {
            let v = a.get(s, j);
            let nz = self.nonzero[s] - u32::from(v > 0.0);
            logs.push(self.sum_factor_ln(self.sums[s] - v, nz));
        }
        self.emit_products(j, &logs, &mut emit);
        self.cost += 2 * self.free_rows.len() as u64;
        self.scratch = logs;
    }

    /// Given row-factor logs aligned with `free_rows`, emits
    /// `ln a_ij + sum_{s != i} logs[s]` for rows with `a_ij > 0`.
    fn emit_products(&mut self, j: usize, logs: &[f64], emit: &mut impl FnMut(usize, f64)) {
        let a = &self.t.matrix;
        let m = logs.len();
        self.prefix.clear();
        self.prefix.push(0.0);
        for (k, &l) in logs.iter().enumerate() {
            let p = self.prefix[k] + l;
            self.prefix.push(p);
        }
        let mut suffix = 0.0;
        for k in (0..m).rev() {
            let i = self.free_rows[k];
            let v = a.get(i, j);
            if v > 0.0 {
                emit(i, v.ln() + self.prefix[k] + suffix);
            }
            suffix += logs[k];
        }
    }

    /// All child bounds `ln U^SS(f(A, i, j))` over the working submatrix in
    /// `O(n^2)`.
    ///
    /// For row `s`, removing the column at sorted position `t` shifts every
    /// later entry one weight down, so the factor is
    /// `sum_{k<t} a*_k δ_k + sum_{k>t} a*_k δ_{k-1}`; both parts are prefix and
    /// suffix sums along the sorted row.
    pub fn ss_all_bounds(&mut self) -> BoundGrid {
        assert_eq!(self.t.kind, BoundKind::SchrijverSoules);
        let n = self.t.matrix.rows();
        let a = &self.t.matrix;
        let d = &self.t.deltas;
        let m = self.free_cols.len();
        // without[s][j]: SS factor of row s with column j removed, as logs
        let mut without = vec![f64::NEG_INFINITY; n * n];
        let mut vals = Vec::with_capacity(m);
        let mut cols = Vec::with_capacity(m);
        for &s in &self.free_rows {
            vals.clear();
            cols.clear();
            for &c in &self.t.order[s] {
                if self.col_free[c] {
                    vals.push(a.get(s, c));
                    cols.push(c);
                }
            }
            // suffix[t] = sum_{k > t} a*_k δ_{k-1}, positions 1-based
            let mut suffix = vec![0.0; m + 1];
            for t in (1..m).rev() {
                suffix[t - 1] = suffix[t] + vals[t] * d[t];
            }
            let mut prefix = 0.0;
            for t in 0..m {
                without[s * n + cols[t]] = (prefix + suffix[t]).ln();
                prefix += vals[t] * d[t + 1];
            }
        }
        self.cost += 3 * (self.free_rows.len() * m) as u64;

        let mut grid = BoundGrid::new(n);
        let mut logs = std::mem::take(&mut self.scratch);
        let free_cols = std::mem::take(&mut self.free_cols);
        for &j in &free_cols {
            logs.clear();
            logs.extend(self.free_rows.iter().map(|&s| without[s * n + j]));
            self.emit_products(j, &logs, &mut |i, v| grid.set(i, j, v));
        }
        self.cost += 2 * (self.free_rows.len() * free_cols.len()) as u64;
        self.free_cols = free_cols;
        self.scratch = logs;
        grid
    }

    /// Child bounds for every free column, whatever the kind.
    pub fn all_bounds(&mut self) -> BoundGrid {
        if self.t.kind == BoundKind::SchrijverSoules {
            return self.ss_all_bounds();
        }
        let mut grid = BoundGrid::new(self.t.matrix.rows());
        let cols = self.free_cols.clone();
        for j in cols {
            self.column_bounds_into(j, |i, v| grid.set(i, j, v));
        }
        grid
    }
}

/// 0/1 row sums drift off the integers after repeated subtraction.
fn snap_integer(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}
