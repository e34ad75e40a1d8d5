//! Disjoint paths between mirror pairs that avoid the third coordinate
//! axis.

use std::collections::BTreeSet;

use super::{Check, CombinatoricsError};
use crate::geometry::l1;

#[derive(Debug, Clone, PartialEq)]
pub struct DetourPaths {
    pub n: i64,
    /// One path per input pair, in input order, from `x^i` to `y^i`.
    pub paths: Vec<Vec<Vec<i64>>>,
}

fn on_third_axis(p: &[i64]) -> bool {
    p.iter().enumerate().all(|(a, &v)| a == 2 || v == 0)
}

impl DetourPaths {
    /// Pairwise vertex-disjointness, avoidance of the `x_3` axis, lengths
    /// at most `8n`, unit steps, and interiors inside `|x_1| < 2n`.
    /// `achieved` is the longest path length.
    pub fn verify(&self, pairs: &[(Vec<i64>, Vec<i64>)]) -> Check {
        let n = self.n;
        let mut seen = BTreeSet::new();
        let mut disjoint = true;
        for path in &self.paths {
            for v in path {
                disjoint &= seen.insert(v.clone());
            }
        }
        let shape = self.paths.len() == pairs.len()
            && self.paths.iter().zip(pairs).all(|(p, (x, y))| {
                p.first() == Some(x)
                    && p.last() == Some(y)
                    && p.windows(2).all(|w| l1(&w[0], &w[1]) == 1)
                    && p[1..p.len() - 1].iter().all(|v| v[0].abs() < 2 * n)
            });
        let avoids = self.paths.iter().flatten().all(|v| !on_third_axis(v));
        let longest = self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0);
        Check {
            bound: (8 * n) as f64,
            achieved: longest as f64,
            pass: disjoint && shape && avoids && longest as i64 <= 8 * n,
        }
    }
}

fn walk(path: &mut Vec<Vec<i64>>, axis: usize, to: i64) {
    let mut cur = path.last().expect("path has a start").clone();
    while cur[axis] != to {
        cur[axis] += (to - cur[axis]).signum();
        path.push(cur.clone());
    }
}

/// Joins each `x^i = (-2n, z^i)` to `y^i = (2n, z^i)` for `n` distinct
/// transverse positions `z^i`, with pairwise disjoint paths that avoid
/// `{t e_3}`.
///
/// Pairs are ranked by their second coordinate. Those with `x_2 < 0` go
/// straight. The `i`-th ranked pair with `x_2 >= 0` runs straight for
/// `2(n-i)+1` steps, moves up one row, crosses, and comes back down the
/// same distance before the end. Later ranks switch rows closer to the
/// middle, so no two paths meet.
pub fn axis_avoiding_paths(pairs: &[(Vec<i64>, Vec<i64>)]) -> Result<DetourPaths, CombinatoricsError> {
    let n = pairs.len() as i64;
    if pairs.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    let d = pairs[0].0.len();
    if d < 3 {
        return Err(CombinatoricsError::UnsupportedDimension(d));
    }
    let bad = |msg: &str| Err(CombinatoricsError::Hypothesis(msg.to_string()));
    for (x, y) in pairs {
        if x.len() != d || y.len() != d {
            return Err(CombinatoricsError::Dimension);
        }
        if x[0] != -2 * n || y[0] != 2 * n || x[1..] != y[1..] {
            return bad("need x = (-2n, z) and y = (2n, z)");
        }
    }
    let distinct: BTreeSet<&[i64]> = pairs.iter().map(|(x, _)| &x[1..]).collect();
    if distinct.len() != pairs.len() {
        return bad("transverse positions must be distinct");
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].0[1..].cmp(&pairs[b].0[1..]));
    let mut paths = vec![Vec::new(); pairs.len()];
    for (rank0, &idx) in order.iter().enumerate() {
        let rank = rank0 as i64 + 1;
        let (x, y) = &pairs[idx];
        let mut path = vec![x.clone()];
        if x[1] >= 0 {
            let offset = 2 * (n - rank) + 1;
            walk(&mut path, 0, -2 * n + offset);
            walk(&mut path, 1, x[1] + 1);
            walk(&mut path, 0, 2 * n - offset);
            walk(&mut path, 1, x[1]);
        }
        walk(&mut path, 0, y[0]);
        paths[idx] = path;
    }
    Ok(DetourPaths { n, paths })
}
