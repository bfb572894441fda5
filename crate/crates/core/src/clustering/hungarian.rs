//! Minimum-cost perfect assignment.
//!
//! Shortest augmenting paths with row and column potentials, `O(n^3)`. Among
//! all optimal assignments the lexicographically smallest one is returned:
//! the final potentials certify every optimal assignment (each one uses
//! only zero-reduced-cost edges), so the tie-break walks the rows in order
//! and moves each row to the smallest column reachable through an
//! alternating cycle of such edges.

use crate::{Error, Result};

/// Returns `sigma` with `sigma[row] = column` minimizing `sum cost[row][sigma[row]]`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::config("assignment cost matrix must be square"));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment cost"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based arrays; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    let mut row_at = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
        row_at[j - 1] = row_of[j] - 1;
    }

    let scale = cost.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let tight = |i: usize, j: usize| cost[i][j] - u[i + 1] - v[j + 1] <= tol;
    lexicographic_min(n, &tight, &mut col_of, &mut row_at);
    Ok(col_of)
}

/// Rewrites a perfect matching of the tight graph into the lexicographically
/// smallest one.
fn lexicographic_min(
    n: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    col_of: &mut [usize],
    row_at: &mut [usize],
) {
    for i in 0..n {
        for c in 0..col_of[i] {
            if !tight(i, c) {
                continue;
            }
            // Row i takes column c; its displaced owner must reach col_of[i]
            // through rows after i.
            let target = col_of[i];
            if let Some(path) = alternating_path(n, tight, col_of, row_at, row_at[c], target, i) {
                for (row, col) in std::iter::once((i, c)).chain(path) {
                    col_of[row] = col;
                    row_at[col] = row;
                }
                break;
            }
        }
    }
}

/// Breadth-first search for an alternating path starting at `start` row and
/// ending by taking column `target`; only rows `> fixed` may move.
/// Returns the `(row, new column)` moves in order.
fn alternating_path(
    n: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    col_of: &[usize],
    row_at: &[usize],
    start: usize,
    target: usize,
    fixed: usize,
) -> Option<Vec<(usize, usize)>> {
    if start <= fixed {
        return None;
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen_row = vec![false; n];
    seen_row[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(r) = queue.pop_front() {
        // Ascending column order keeps the search deterministic.
        for c in 0..n {
            if c == col_of[r] || !tight(r, c) {
                continue;
            }
            if c == target {
                let mut moves = vec![(r, c)];
                let mut cur = r;
                while let Some((prev_row, col)) = parent[cur] {
                    moves.push((prev_row, col));
                    cur = prev_row;
                }
                moves.reverse();
                return Some(moves);
            }
            let owner = row_at[c];
            if owner > fixed && !seen_row[owner] {
                seen_row[owner] = true;
                parent[owner] = Some((r, c));
                queue.push_back(owner);
            }
        }
    }
    None
}

/// Total cost of an assignment.
pub fn assignment_cost(cost: &[Vec<f64>], sigma: &[usize]) -> f64 {
    sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}
