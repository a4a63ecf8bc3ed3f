//! Minimum-cost rectangular assignment.

use super::MetricError;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// (row, column) pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    pub fn column_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// Potentials-based O(n^2 m) solver for n <= m; returns the column of each row.
fn solve_wide(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
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
            }
            for j in 0..=m {
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
    let mut col_of = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            col_of[p[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Optimal total over `rows` x `cols` (min(|rows|, |cols|) pairs).
fn optimum(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    if rows.len() <= cols.len() {
        let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| cost[r][c]).collect()).collect();
        let a = solve_wide(&sub);
        a.iter().enumerate().map(|(i, &j)| sub[i][j]).sum()
    } else {
        let sub: Vec<Vec<f64>> = cols.iter().map(|&c| rows.iter().map(|&r| cost[r][c]).collect()).collect();
        let a = solve_wide(&sub);
        a.iter().enumerate().map(|(i, &j)| sub[i][j]).sum()
    }
}

/// Assigns min(n, m) row/column pairs with minimal total cost. Among optimal
/// assignments the lexicographically smallest pair list wins.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<Assignment, MetricError> {
    let n = cost.len();
    if n == 0 || cost[0].is_empty() {
        return Err(MetricError::EmptyMatrix);
    }
    let m = cost[0].len();
    if cost.iter().any(|r| r.len() != m) {
        return Err(MetricError::InvalidInput("ragged cost matrix".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(MetricError::InvalidInput("non-finite cost".into()));
    }
    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..m).collect();
    let best = optimum(cost, &all_rows, &all_cols);
    let scale = cost.iter().flatten().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-9 * scale * n.max(m) as f64;
    let need = n.min(m);

    let mut pairs = Vec::with_capacity(need);
    let mut fixed = 0.0;
    let mut free_cols = all_cols;
    for row in 0..n {
        if pairs.len() == need {
            break;
        }
        let rest: Vec<usize> = (row + 1..n).collect();
        let mut chosen = false;
        for (k, &col) in free_cols.iter().enumerate() {
            let mut cols = free_cols.clone();
            cols.remove(k);
            if pairs.len() + 1 + rest.len().min(cols.len()) < need {
                continue;
            }
            if fixed + cost[row][col] + optimum(cost, &rest, &cols) <= best + tol {
                pairs.push((row, col));
                fixed += cost[row][col];
                free_cols.remove(k);
                chosen = true;
                break;
            }
        }
        if !chosen {
            debug_assert!(pairs.len() + rest.len().min(free_cols.len()) >= need);
        }
    }
    let total = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    Ok(Assignment { pairs, total })
}
