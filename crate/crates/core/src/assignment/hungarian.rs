//! Minimum-cost assignment.
//!
//! Shortest augmenting paths with row/column potentials, O(n²m). Rectangular
//! problems are squared up with zero-cost dummy rows, which leaves the
//! optimum unchanged. Among all optimal assignments the lexicographically
//! smallest one is returned: with optimal potentials fixed, the optimal
//! assignments are exactly the perfect matchings of the tight-edge graph,
//! and each row in turn takes its smallest column that still extends to such
//! a matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    /// Row-major costs; requires `rows <= cols` and finite, non-negative
    /// entries.
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self> {
        if rows > cols {
            return Err(Error::invalid(format!(
                "cost matrix has {rows} rows but only {cols} columns; transpose it first"
            )));
        }
        if costs.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} costs for a {rows}x{cols} matrix, got {}",
                rows * cols,
                costs.len()
            )));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::invalid(format!("costs must be finite and non-negative, got {c}")));
        }
        Ok(Self { rows, cols, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged cost matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.costs[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `assignment[r]` is the column given to row `r`.
    pub assignment: Vec<usize>,
    pub score: f64,
}

pub fn hungarian_min_cost(m: &CostMatrix) -> Matching {
    let (n, k) = (m.rows, m.cols);
    if n == 0 {
        return Matching {
            assignment: Vec::new(),
            score: 0.0,
        };
    }
    let cost = |i: usize, j: usize| if i < n { m.get(i, j) } else { 0.0 };

    // 1-based potentials; p[j] is the row (1-based) holding column j.
    let mut u = vec![0.0f64; k + 1];
    let mut v = vec![0.0f64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let scale = m.costs.iter().fold(1.0f64, |a, &c| a.max(c));
    let eps = 1e-9 * scale * k as f64;
    let tight = |i: usize, j: usize| cost(i, j) - u[i + 1] - v[j + 1] <= eps;

    let mut row_of = vec![0usize; k];
    let mut col_of = vec![0usize; k];
    for j in 1..=k {
        row_of[j - 1] = p[j] - 1;
        col_of[p[j] - 1] = j - 1;
    }
    lexicographic_fix(n, k, &tight, &mut row_of, &mut col_of);

    let assignment: Vec<usize> = col_of[..n].to_vec();
    let score = assignment.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum();
    Matching { assignment, score }
}

/// Rewrites the perfect matching (`row_of`/`col_of`, over `k` rows of which
/// the first `n` are real) into the lexicographically smallest perfect
/// matching of the tight graph.
fn lexicographic_fix(
    n: usize,
    k: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    row_of: &mut [usize],
    col_of: &mut [usize],
) {
    let mut fixed_row = vec![false; k];
    let mut fixed_col = vec![false; k];
    for i in 0..n {
        let c = col_of[i];
        // next[r] = column row r moves to on an alternating path ending at c.
        let mut next: Vec<Option<usize>> = vec![None; k];
        let mut queue = std::collections::VecDeque::from([c]);
        while let Some(col) = queue.pop_front() {
            for r in 0..k {
                if r == i || fixed_row[r] || next[r].is_some() || col_of[r] == col || !tight(r, col) {
                    continue;
                }
                next[r] = Some(col);
                queue.push_back(col_of[r]);
            }
        }
        let j = (0..k)
            .find(|&j| !fixed_col[j] && tight(i, j) && (j == c || next[row_of[j]].is_some()))
            .expect("current column is always feasible");
        if j != c {
            let mut r = row_of[j];
            col_of[i] = j;
            row_of[j] = i;
            loop {
                let to = next[r].expect("path reaches the freed column");
                col_of[r] = to;
                let displaced = row_of[to];
                row_of[to] = r;
                if to == c {
                    break;
                }
                r = displaced;
            }
        }
        fixed_row[i] = true;
        fixed_col[j] = true;
    }
}
