//! Minimum-cost assignment (Hungarian algorithm, potentials formulation).
//!
//! O(n^3) over a square matrix; rectangular inputs are padded with
//! zero-cost dummy rows/columns, so with costs <= 0 (negated IoUs) real
//! pairs are preferred exactly when they improve the total.

/// Solves min-cost assignment for a rectangular cost matrix.
/// Returns, per row, the assigned real column (dummy pads excluded).
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };

    // Potentials u, v and column ownership p; p[j] = row owning column j,
    // 1-indexed with 0 as the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
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
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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

    let mut out = vec![None; rows];
    for (j, &i) in p.iter().enumerate().take(n + 1).skip(1) {
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| cost[i][j]))
            .sum()
    }

    #[test]
    fn hand_solved_three_by_three() {
        // Optimal is the anti-diagonal: 1 + 2 + 3 = 6.
        let cost = vec![
            vec![8.0, 4.0, 1.0],
            vec![6.0, 2.0, 9.0],
            vec![3.0, 7.0, 8.0],
        ];
        let a = min_cost_assignment(&cost);
        assert_eq!(a, vec![Some(2), Some(1), Some(0)]);
        assert_eq!(total(&cost, &a), 6.0);
    }

    #[test]
    fn rectangular_prefers_negative_pairs() {
        // Two rows, one column: only the cheaper row should take it.
        let cost = vec![vec![-0.9], vec![-0.3]];
        let a = min_cost_assignment(&cost);
        assert_eq!(a, vec![Some(0), None]);

        let cost = vec![vec![-0.2, -0.8, -0.1]];
        let a = min_cost_assignment(&cost);
        assert_eq!(a, vec![Some(1)]);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(min_cost_assignment(&[]), Vec::<Option<usize>>::new());
        let no_cols: Vec<Vec<f64>> = vec![vec![], vec![]];
        assert_eq!(min_cost_assignment(&no_cols), vec![None, None]);
    }

    /// Brute force over all injective row->column maps (None allowed), with
    /// dummy slots costing 0 like the padded matrix.
    fn brute_best(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = rec(cost, row + 1, used); // leave row unmatched
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let cols = cost.first().map_or(0, Vec::len);
        rec(cost, 0, &mut vec![false; cols])
    }

    proptest! {
        // Against brute force on small all-negative matrices (the actual
        // use: negated IoUs).
        #[test]
        fn optimal_on_small_matrices(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1.0..0.0f64, 16),
        ) {
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| seed[(i * 4 + j) % 16]).collect())
                .collect();
            let a = min_cost_assignment(&cost);
            // Validity: injective.
            let mut seen = vec![false; cols];
            for j in a.iter().flatten() {
                prop_assert!(!seen[*j]);
                seen[*j] = true;
            }
            prop_assert!((total(&cost, &a) - brute_best(&cost)).abs() <= 1e-9);
        }
    }
}
