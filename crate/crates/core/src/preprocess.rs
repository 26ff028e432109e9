//! Doubly-stochastic preprocessing: support filtering, Sinkhorn balancing
//! and row-max division, with the scale factors kept so that
//! `per(original) = per(matrix) * exp(log_scale)`.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    pub matrix: Matrix,
    /// Natural log of `per(original) / per(matrix)`.
    pub log_scale: f64,
    /// Row-major mask of the entries kept by the support filter.
    pub support_mask: Vec<bool>,
    /// Set when the input has no positive-weight permutation.
    pub zero_permanent: bool,
}

impl ScaledMatrix {
    pub fn scale(&self) -> LogScale {
        if self.zero_permanent {
            LogScale::ZERO
        } else {
            LogScale::from_ln(self.log_scale)
        }
    }

    pub fn in_support(&self, i: usize, j: usize) -> bool {
        self.support_mask[i * self.matrix.cols() + j]
    }
}

/// A maximum matching; `row_match[i]` is the column of row `i`.
pub fn maximum_matching(m: &Matrix) -> Vec<Option<usize>> {
    let (rows, cols) = (m.rows(), m.cols());
    let adj: Vec<Vec<usize>> = (0..rows)
        .map(|i| (0..cols).filter(|&j| m.get(i, j) > 0.0).collect())
        .collect();
    let mut col_match: Vec<Option<usize>> = vec![None; cols];
    let mut seen = vec![usize::MAX; cols];
    for i in 0..rows {
        augment(i, i, &adj, &mut col_match, &mut seen);
    }
    let mut row_match = vec![None; rows];
    for (j, r) in col_match.iter().enumerate() {
        if let Some(i) = r {
            row_match[*i] = Some(j);
        }
    }
    row_match
}

// Kuhn's augmenting path search, iterative to avoid deep recursion.
fn augment(
    root: usize,
    stamp: usize,
    adj: &[Vec<usize>],
    col_match: &mut [Option<usize>],
    seen: &mut [usize],
) -> bool {
    // stack of (row, next edge index); parent column for each pushed row
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&mut (i, ref mut e)) = stack.last_mut() {
        if *e == adj[i].len() {
            stack.pop();
            via.pop();
            continue;
        }
        let j = adj[i][*e];
        *e += 1;
        if seen[j] == stamp {
            continue;
        }
        seen[j] = stamp;
        match col_match[j] {
            None => {
                // flip the path
                via.push(j);
                for (k, &(r, _)) in stack.iter().enumerate() {
                    col_match[via[k]] = Some(r);
                }
                return true;
            }
            Some(next) => {
                via.push(j);
                stack.push((next, 0));
            }
        }
    }
    false
}

pub fn has_perfect_matching(m: &Matrix) -> bool {
    m.is_square() && maximum_matching(m).iter().all(Option::is_some)
}

/// Zeroes every entry that lies on no positive-weight permutation.
///
/// With a perfect matching `M`, entry `(i, j)` with `j = M(i')` lies on a
/// perfect matching iff rows `i` and `i'` share a strongly connected
/// component of the graph `i -> i'` for `a_{i M(i')} > 0`. Without a perfect
/// matching the result is all zero.
pub fn support_filter(m: &Matrix) -> Result<(Matrix, Vec<bool>)> {
    let n = m.order()?;
    let matching = maximum_matching(m);
    if matching.iter().any(Option::is_none) {
        return Ok((Matrix::zeros(n, n), vec![false; n * n]));
    }
    let mut owner = vec![0; n];
    for (i, j) in matching.iter().enumerate() {
        owner[j.expect("perfect")] = i;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j) > 0.0 && owner[j] != i {
                g.add_edge(nodes[i], nodes[owner[j]], ());
            }
        }
    }
    let mut comp = vec![0; n];
    for (c, scc) in tarjan_scc(&g).iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    let mut out = m.clone();
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let keep = m.get(i, j) > 0.0 && comp[i] == comp[owner[j]];
            mask[i * n + j] = keep;
            if !keep {
                out.set(i, j, 0.0);
            }
        }
    }
    Ok((out, mask))
}

/// `iterations` rounds of one row pass followed by one column pass.
pub fn sinkhorn(m: &Matrix, iterations: usize) -> Result<ScaledMatrix> {
    let n = m.order()?;
    let mut a = m.clone();
    let mut log_scale = 0.0;
    for _ in 0..iterations {
        for i in 0..n {
            let s = a.row_sum(i);
            if s <= 0.0 {
                return Err(Error::Shape(format!("row {i} is zero during balancing")));
            }
            if s != 1.0 {
                a.scale_row(i, 1.0 / s);
                log_scale += s.ln();
            }
        }
        for j in 0..n {
            let s: f64 = a.column(j).sum();
            if s <= 0.0 {
                return Err(Error::Shape(format!("column {j} is zero during balancing")));
            }
            if s != 1.0 {
                a.scale_col(j, 1.0 / s);
                log_scale += s.ln();
            }
        }
    }
    let support_mask = a.data().iter().map(|&v| v > 0.0).collect();
    Ok(ScaledMatrix {
        matrix: a,
        log_scale,
        support_mask,
        zero_permanent: false,
    })
}

/// Divides each row by its maximum, recording the factors.
pub fn row_max_division(s: &mut ScaledMatrix) {
    for i in 0..s.matrix.rows() {
        let max = s.matrix.row_max(i);
        if max > 0.0 && max != 1.0 {
            s.matrix.scale_row(i, 1.0 / max);
            s.log_scale += max.ln();
        }
    }
}

/// Support filter, `n^2` Sinkhorn rounds, then row-max division.
pub fn ds_pipeline(m: &Matrix) -> Result<ScaledMatrix> {
    let n = m.order()?;
    ds_pipeline_with(m, n * n)
}

pub fn ds_pipeline_with(m: &Matrix, iterations: usize) -> Result<ScaledMatrix> {
    let n = m.order()?;
    let (filtered, mask) = support_filter(m)?;
    if !mask.iter().any(|&k| k) {
        return Ok(ScaledMatrix {
            matrix: Matrix::zeros(n, n),
            log_scale: 0.0,
            support_mask: mask,
            zero_permanent: true,
        });
    }
    let mut s = sinkhorn(&filtered, iterations)?;
    s.support_mask = mask;
    row_max_division(&mut s);
    Ok(s)
}
