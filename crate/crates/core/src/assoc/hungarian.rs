//! O(n³) Hungarian (Kuhn–Munkres) kernel for square minimization problems,
//! in the dual-potential / augmenting-path form. Works directly on f64
//! costs so no integer scaling is needed.

/// Solve the square n×n assignment problem, minimizing total cost.
/// Returns `row_to_col`: the column assigned to each row.
///
/// Rows are introduced in ascending order and columns scanned in ascending
/// order, so the result is deterministic for a given matrix.
#[allow(clippy::needless_range_loop)] // index arithmetic mirrors the algorithm
pub fn minimize<F>(n: usize, cost: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays with column 0 as a sentinel for the augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_to_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_to_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == 0 {
                break;
            }
        }
        // Walk the alternating path back, flipping assignments.
        loop {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        let i = col_to_row[j];
        if i != 0 {
            row_to_col[i - 1] = j - 1;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(m: &[Vec<f64>], assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| m[i][j])
            .sum()
    }

    /// Exhaustive minimum over all permutations.
    fn brute_force_min(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let t: f64 = perm.iter().enumerate().map(|(i, &j)| m[i][j]).sum();
            if t < best {
                best = t;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn known_three_by_three() {
        let m = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let assignment = minimize(3, |i, j| m[i][j]);
        assert_eq!(total(&m, &assignment), 5.0);
        assert_eq!(assignment, vec![1, 0, 2]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let m: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect();
            let assignment = minimize(n, |i, j| m[i][j]);
            let got = total(&m, &assignment);
            let want = brute_force_min(&m);
            assert!(
                (got - want).abs() < 1e-9,
                "n={n}: hungarian {got} vs brute force {want}"
            );
        }
    }
}
