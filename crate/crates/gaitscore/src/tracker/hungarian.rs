//! Minimum-cost assignment (Kuhn-Munkres with potentials, O(n^3)).

/// Solves the rectangular assignment problem for an `m x n` cost matrix,
/// returning `min(m, n)` row/column pairs of minimum total cost. Pairs come
/// back sorted by row index.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let m = cost.len();
    if m == 0 {
        return Vec::new();
    }
    let n = cost[0].len();
    debug_assert!(cost.iter().all(|row| row.len() == n));
    if n == 0 {
        return Vec::new();
    }

    let mut pairs = if m <= n {
        solve(&|i, j| cost[i][j], m, n)
    } else {
        solve(&|i, j| cost[j][i], n, m)
            .into_iter()
            .map(|(i, j)| (j, i))
            .collect()
    };
    pairs.sort_unstable();
    pairs
}

/// Core solver; requires `m <= n`. `cost(i, j)` is the cost of assigning
/// row `i` to column `j`.
fn solve(cost: &dyn Fn(usize, usize) -> f64, m: usize, n: usize) -> Vec<(usize, usize)> {
    // 1-based arrays; p[j] is the row matched to column j (0 = free).
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
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
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    (1..=n)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}
