//! Exact assignment and bipartite matching.

/// Minimum-cost perfect assignment for a square cost matrix, by the
/// shortest augmenting path method with vertex potentials. Returns the
/// column assigned to each row and the total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based arrays; column 0 is a virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
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
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

/// Maximum bipartite matching by augmenting paths. `adj[l]` lists the
/// right vertices adjacent to left vertex `l`. Returns `(left, right)`
/// pairs.
pub fn max_bipartite_matching(adj: &[Vec<usize>], right_count: usize) -> Vec<(usize, usize)> {
    let mut match_right: Vec<Option<usize>> = vec![None; right_count];
    for l in 0..adj.len() {
        let mut seen = vec![false; right_count];
        augment(l, adj, &mut match_right, &mut seen);
    }
    let mut pairs: Vec<(usize, usize)> =
        match_right.iter().enumerate().filter_map(|(r, l)| l.map(|l| (l, r))).collect();
    pairs.sort_unstable();
    pairs
}

fn augment(l: usize, adj: &[Vec<usize>], match_right: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &r in &adj[l] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        if match_right[r].is_none_or(|other| augment(other, adj, match_right, seen)) {
            match_right[r] = Some(l);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for n in 1..=6 {
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
            let (assign, total) = min_cost_assignment(&cost);
            let mut cols = assign.clone();
            cols.sort_unstable();
            assert_eq!(cols, (0..n).collect::<Vec<_>>());
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((total - best).abs() < 1e-9);
        }
    }

    #[test]
    fn matching_finds_perfect_when_available() {
        // Left 0 can only take right 0, so left 1 must be rerouted.
        let adj = vec![vec![0], vec![0, 1], vec![1, 2]];
        assert_eq!(max_bipartite_matching(&adj, 3).len(), 3);
        assert!(max_bipartite_matching(&[], 0).is_empty());
    }
}
