/// Minimum-cost assignment for an `n x m` cost matrix.
///
/// Pairs with non-finite cost are forbidden. The result has as many pairs as
/// the forbidden pattern allows (at most `min(n, m)`), minimal total cost
/// among those, and is the lexicographically smallest such list of
/// `(row, col)` pairs. Rows are returned in increasing order.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");

    // Square problem of side n + m: real rows may go unmatched through a
    // dummy column at cost `big`, and dummy rows absorb unused real columns
    // at no cost. Costs are shifted to be non-negative, so `big` above
    // (pairs + 1) * range makes any extra allowed pair worth more than any
    // rearrangement of finite costs.
    let (lo, hi) = cost
        .iter()
        .flatten()
        .filter(|c| c.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
    let range = if lo.is_finite() { hi - lo } else { 0.0 };
    let big = (n.min(m) as f64 + 1.0) * range + 1.0;
    let size = n + m;
    let mut a = vec![vec![0.0; size]; size];
    for (r, row) in cost.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            a[r][c] = if x.is_finite() { x - lo } else { f64::INFINITY };
        }
        a[r][m..].fill(big);
    }
    let tol = 1e-12 * size as f64 * (1.0 + big);

    let (mut col_of, u, v) = solve(&a);
    let tight = |r: usize, c: usize| a[r][c] - u[r] - v[c] <= tol;
    let mut row_of = vec![0; size];
    for (r, &c) in col_of.iter().enumerate() {
        row_of[c] = r;
    }

    // Every perfect matching on tight edges is optimal. Walk rows in order
    // and give each the smallest column that still leaves one, with
    // "unmatched" ordered after every real column.
    let mut fixed = vec![false; size];
    for r in 0..n {
        for c in 0..size {
            if !tight(r, c) || fixed[row_of[c]] {
                continue;
            }
            if col_of[r] == c || reroute(r, c, &tight, &fixed, &mut col_of, &mut row_of, size) {
                break;
            }
        }
        fixed[r] = true;
    }
    (0..n)
        .filter(|&r| col_of[r] < m)
        .map(|r| (r, col_of[r]))
        .collect()
}

/// Moves row `r` to column `c` by an alternating path of tight edges that
/// ends at `r`'s old column, leaving fixed rows alone. Returns whether such a
/// path exists.
fn reroute(
    r: usize,
    c: usize,
    tight: &impl Fn(usize, usize) -> bool,
    fixed: &[bool],
    col_of: &mut [usize],
    row_of: &mut [usize],
    size: usize,
) -> bool {
    let target = col_of[r];
    // BFS over rows that need a new column; `via[col]` is the row that takes it
    let mut via = vec![usize::MAX; size];
    let mut queue = std::collections::VecDeque::from([row_of[c]]);
    via[c] = r;
    while let Some(x) = queue.pop_front() {
        for y in 0..size {
            if via[y] != usize::MAX || !tight(x, y) {
                continue;
            }
            let owner = row_of[y];
            if y != target && (fixed[owner] || owner == r) {
                continue;
            }
            via[y] = x;
            if y == target {
                // walk back, handing each column to the row that reached it
                let mut col = y;
                loop {
                    let row = via[col];
                    let prev = col_of[row];
                    col_of[row] = col;
                    row_of[col] = row;
                    if row == r {
                        return true;
                    }
                    col = prev;
                }
            }
            queue.push_back(owner);
        }
    }
    false
}

/// Minimum-cost perfect matching of a square matrix by shortest augmenting
/// paths. Returns the column of each row and the row and column potentials,
/// which satisfy `a[i][j] >= u[i] + v[j]` with equality on the matching.
fn solve(a: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = a.len();
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
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
    for j in 1..=n {
        col_of[p[j] - 1] = j - 1;
    }
    (col_of, u[1..].to_vec(), v[1..].to_vec())
}
