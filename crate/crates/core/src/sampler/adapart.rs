//! Dynamic column choice with partition refinement.

use super::state::{BoundGrid, SamplerState, Tables};
use crate::bounds::NESTING_TOLERANCE;
use crate::error::{Error, Result};

/// Default cap on refinement rounds per level.
pub const DEFAULT_MAX_REFINEMENTS: usize = 32;

/// The column minimizing the sum of child bounds, with those children.
#[derive(Clone, Debug)]
pub struct ColumnChoice {
    pub column: usize,
    /// `(row, ln u(S_ij))` for rows with a positive bound.
    pub children: Vec<(usize, f64)>,
    /// `ln sum_i u(S_ij)`.
    pub sum_log: f64,
}

/// A node of the refined partition: pairs fixed below the current state and
/// its log bound relative to the current fixed weight.
#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub pairs: Vec<(usize, usize)>,
    pub log: f64,
}

pub(crate) fn log_sum_exp(logs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Picks the free column with the smallest child-bound sum; ties go to the
/// smallest column index. `None` when no column is free.
pub fn adapart_pick_column(state: &SamplerState<'_>, bounds: &BoundGrid) -> Option<ColumnChoice> {
    let mut best: Option<ColumnChoice> = None;
    for &j in state.free_cols() {
        let children: Vec<(usize, f64)> = state
            .free_rows()
            .iter()
            .map(|&i| (i, bounds.log(i, j)))
            .filter(|&(_, l)| l > f64::NEG_INFINITY)
            .collect();
        let sum_log = log_sum_exp(children.iter().map(|c| c.1));
        if best.as_ref().is_none_or(|b| sum_log < b.sum_log) {
            best = Some(ColumnChoice {
                column: j,
                children,
                sum_log,
            });
        }
    }
    best
}

/// Turns the minimizing partition into one whose bounds sum to at most
/// `parent_log`, replacing the largest refinable node by its own minimizing
/// partition until the sum fits.
pub(crate) fn refine(
    state: &SamplerState<'_>,
    tables: &Tables,
    parent_log: f64,
    choice: ColumnChoice,
    max_refinements: usize,
) -> Result<Vec<Node>> {
    let j = choice.column;
    let mut nodes: Vec<Node> = choice
        .children
        .into_iter()
        .map(|(i, log)| Node {
            pairs: vec![(i, j)],
            log,
        })
        .collect();
    let limit = parent_log + NESTING_TOLERANCE.ln_1p();
    let free = state.free_cols().len();
    let mut rounds = 0;
    while log_sum_exp(nodes.iter().map(|n| n.log)) > limit {
        if rounds == max_refinements {
            return Err(Error::NestingFailure { refinements: rounds });
        }
        let Some(k) = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.pairs.len() < free)
            .max_by(|a, b| a.1.log.total_cmp(&b.1.log))
            .map(|(k, _)| k)
        else {
            return Err(Error::NestingFailure { refinements: rounds });
        };
        let node = nodes.swap_remove(k);
        nodes.extend(split_naive(state, tables, &node));
        rounds += 1;
    }
    Ok(nodes)
}

/// Minimizing partition of `node` by direct evaluation of the bounds.
fn split_naive(state: &SamplerState<'_>, tables: &Tables, node: &Node) -> Vec<Node> {
    let a = tables.matrix();
    let kind = tables.kind();
    let rows: Vec<usize> = state
        .free_rows()
        .iter()
        .copied()
        .filter(|r| !node.pairs.iter().any(|p| p.0 == *r))
        .collect();
    let cols: Vec<usize> = state
        .free_cols()
        .iter()
        .copied()
        .filter(|c| !node.pairs.iter().any(|p| p.1 == *c))
        .collect();
    let picked: f64 = node.pairs.iter().map(|&(i, j)| a.get(i, j).ln()).sum();
    let remaining_log = |skip_row: usize, skip_col: usize| -> f64 {
        let mut buf = Vec::with_capacity(cols.len());
        let mut total = 0.0;
        for &r in rows.iter().filter(|&&r| r != skip_row) {
            buf.clear();
            buf.extend(cols.iter().filter(|&&c| c != skip_col).map(|&c| a.get(r, c)));
            total += kind.row_factor(&buf).ln();
        }
        total
    };
    let mut best: Option<(f64, Vec<Node>)> = None;
    for &c in &cols {
        let children: Vec<Node> = rows
            .iter()
            .filter(|&&r| a.get(r, c) > 0.0)
            .map(|&r| {
                let mut pairs = node.pairs.clone();
                pairs.push((r, c));
                Node {
                    log: picked + a.get(r, c).ln() + remaining_log(r, c),
                    pairs,
                }
            })
            .filter(|n| n.log > f64::NEG_INFINITY)
            .collect();
        let sum = log_sum_exp(children.iter().map(|n| n.log));
        if best.as_ref().is_none_or(|b| sum < b.0) {
            best = Some((sum, children));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}
