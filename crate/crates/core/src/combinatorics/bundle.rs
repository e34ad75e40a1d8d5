//! Bundles of lattice paths with bounded overlap between two point sets.

use std::collections::BTreeMap;

use super::separated::separated_matching;
use super::{Check, CombinatoricsError, PointSet};
use crate::geometry::l1;

/// `(2d)^(2d)`, the default overlap constant.
pub fn default_chi(dim: usize) -> f64 {
    ((2 * dim) as f64).powi(2 * dim as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleGeometry {
    /// `S1` on `x_axis = h`, `S2` on `x_axis = h + ell`, `l_inf` spread at
    /// most `spread`.
    Parallel { axis: usize, ell: i64, spread: i64 },
    /// `S1` on `x_i = 0`, `S2` on `x_j = 0`, both inside `[-spread, spread]^d`.
    Perpendicular { i: usize, j: usize, spread: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub paths: Vec<Vec<Vec<i64>>>,
    pub length_bound: f64,
    pub multiplicity_bound: f64,
}

impl PathBundle {
    /// How many paths visit each vertex.
    pub fn multiplicity(&self) -> BTreeMap<Vec<i64>, usize> {
        let mut out = BTreeMap::new();
        for path in &self.paths {
            let mut seen: Vec<&Vec<i64>> = path.iter().collect();
            seen.sort_unstable();
            seen.dedup();
            for v in seen {
                *out.entry(v.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn max_multiplicity(&self) -> usize {
        self.multiplicity().values().copied().max().unwrap_or(0)
    }

    /// Edge count of the longest path.
    pub fn max_length(&self) -> usize {
        self.paths.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0)
    }

    /// Nearest-neighbour steps, starts in `from` and ends in `to` (each used
    /// at most once), the length bound and the multiplicity bound.
    /// `achieved` is the maximum multiplicity.
    pub fn verify(&self, from: &PointSet, to: &PointSet) -> Check {
        let steps_ok = self.paths.iter().all(|p| !p.is_empty() && p.windows(2).all(|w| l1(&w[0], &w[1]) == 1));
        let mut starts: Vec<&Vec<i64>> = self.paths.iter().filter_map(|p| p.first()).collect();
        let mut ends: Vec<&Vec<i64>> = self.paths.iter().filter_map(|p| p.last()).collect();
        let ends_ok = starts.iter().all(|s| from.contains(s)) && ends.iter().all(|e| to.contains(e));
        starts.sort_unstable();
        starts.dedup();
        ends.sort_unstable();
        ends.dedup();
        let distinct_ok = starts.len() == self.paths.len() && ends.len() == self.paths.len();
        let length_ok = self.max_length() as f64 <= self.length_bound;
        let mult = self.max_multiplicity();
        Check {
            bound: self.multiplicity_bound,
            achieved: mult as f64,
            pass: steps_ok && ends_ok && distinct_ok && length_ok && mult as f64 <= self.multiplicity_bound,
        }
    }
}

/// A shortest lattice path from `x` to `y` that never strays more than one
/// unit (in `l_inf`) from the segment `[x, y]`: each step advances the axis
/// furthest behind its proportional share.
pub fn digital_path(x: &[i64], y: &[i64]) -> Vec<Vec<i64>> {
    let delta: Vec<i64> = y.iter().zip(x).map(|(b, a)| b - a).collect();
    let total: i64 = delta.iter().map(|v| v.abs()).sum();
    let mut taken = vec![0i64; x.len()];
    let mut cur = x.to_vec();
    let mut path = vec![cur.clone()];
    for step in 1..=total {
        // Deficit of axis a after this step, scaled by `total`.
        let axis = (0..x.len())
            .filter(|&a| taken[a] < delta[a].abs())
            .max_by_key(|&a| (step * delta[a].abs() - total * taken[a], std::cmp::Reverse(a)))
            .expect("steps remain");
        taken[axis] += 1;
        cur[axis] += delta[axis].signum();
        path.push(cur.clone());
    }
    path
}

/// `l_inf` distance from `p` to the segment `[x, y]` is at most one.
pub fn near_segment(p: &[i64], x: &[i64], y: &[i64]) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for a in 0..p.len() {
        let off = (p[a] - x[a]) as f64;
        let d = (y[a] - x[a]) as f64;
        if d == 0.0 {
            if off.abs() > 1.0 {
                return false;
            }
            continue;
        }
        let (t1, t2) = ((off - 1.0) / d, (off + 1.0) / d);
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    lo <= hi + 1e-12
}

fn truncate_pair(s1: &PointSet, s2: &PointSet) -> Result<(PointSet, PointSet), CombinatoricsError> {
    let m = s1.len().min(s2.len());
    Ok((
        PointSet::new(s1.dim(), s1.points()[..m].iter().cloned())?,
        PointSet::new(s2.dim(), s2.points()[..m].iter().cloned())?,
    ))
}

/// At least `ceil(min(|S1|, |S2|) / 2)` lattice paths from distinct points
/// of `S1` to distinct points of `S2`, of length at most `2dK`, with
/// bounded overlap.
///
/// Parallel sets: match by [`separated_matching`] and follow each segment
/// with a [`digital_path`]; separated segments keep the overlap below
/// `chi (K/l)^(d-1)`. Perpendicular sets: after reflecting so that at least
/// half of each set lies on the positive side of the other's hyperplane,
/// lift each kept point of `S2` along `e_i + e_j` to `x_i = K`, match the
/// kept points of `S1` to the lifted points as in the parallel case, and
/// return along the diagonal staircase.
pub fn disjoint_path_bundle(
    s1: &PointSet,
    s2: &PointSet,
    geometry: BundleGeometry,
    chi: f64,
) -> Result<PathBundle, CombinatoricsError> {
    let d = s1.dim();
    if d < 3 {
        return Err(CombinatoricsError::UnsupportedDimension(d));
    }
    if s2.dim() != d {
        return Err(CombinatoricsError::Dimension);
    }
    if s1.is_empty() || s2.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    let keep = s1.len().min(s2.len()).div_ceil(2);
    match geometry {
        BundleGeometry::Parallel { axis, ell, spread } => {
            let (a, b) = truncate_pair(s1, s2)?;
            let matching = separated_matching(&a, &b, axis, ell, spread)?;
            let paths = matching.segments.iter().take(keep).map(|(x, y)| digital_path(x, y)).collect();
            Ok(PathBundle {
                paths,
                length_bound: (2 * d) as f64 * spread as f64,
                multiplicity_bound: chi * (spread as f64 / ell as f64).powi(d as i32 - 1),
            })
        }
        BundleGeometry::Perpendicular { i, j, spread } => perpendicular(s1, s2, i, j, spread, keep, chi),
    }
}

fn perpendicular(
    s1: &PointSet,
    s2: &PointSet,
    i: usize,
    j: usize,
    k: i64,
    keep: usize,
    chi: f64,
) -> Result<PathBundle, CombinatoricsError> {
    let d = s1.dim();
    let bad = |msg: &str| Err(CombinatoricsError::Hypothesis(msg.to_string()));
    if i == j || i >= d || j >= d {
        return bad("need two distinct axes");
    }
    if k < 1 {
        return bad("need K >= 1");
    }
    if s1.points().iter().any(|p| p[i] != 0) || s2.points().iter().any(|p| p[j] != 0) {
        return bad("S1 must lie on x_i = 0 and S2 on x_j = 0");
    }
    if s1.points().iter().chain(s2.points()).any(|p| p.iter().any(|v| v.abs() > k)) {
        return bad("points must lie in [-K, K]^d");
    }
    let flip_j = 2 * s1.points().iter().filter(|p| p[j] >= 0).count() < s1.len();
    let flip_i = 2 * s2.points().iter().filter(|p| p[i] >= 0).count() < s2.len();
    let reflect = |p: &[i64]| -> Vec<i64> {
        let mut q = p.to_vec();
        if flip_i {
            q[i] = -q[i];
        }
        if flip_j {
            q[j] = -q[j];
        }
        q
    };
    let first: Vec<Vec<i64>> =
        s1.points().iter().map(|p| reflect(p)).filter(|p| p[j] >= 0).take(keep).collect();
    let second: Vec<Vec<i64>> =
        s2.points().iter().map(|p| reflect(p)).filter(|p| p[i] >= 0).take(keep).collect();
    debug_assert_eq!((first.len(), second.len()), (keep, keep));
    let lift = |z: &[i64]| -> Vec<i64> {
        let t = k - z[i];
        let mut y = z.to_vec();
        y[i] += t;
        y[j] += t;
        y
    };
    let lifted: Vec<Vec<i64>> = second.iter().map(|z| lift(z)).collect();
    let spread = first
        .iter()
        .flat_map(|x| lifted.iter().map(move |y| crate::geometry::linf(x, y)))
        .max()
        .expect("nonempty");
    let a = PointSet::new(d, first)?;
    let b = PointSet::new(d, lifted)?;
    let matching = separated_matching(&a, &b, i, k, spread)?;
    let mut paths = Vec::with_capacity(keep);
    for (x, y) in &matching.segments {
        let z = second.iter().find(|z| &lift(z) == y).expect("lifted from S2");
        let mut path = digital_path(x, y);
        // Staircase back down from y to z, alternating -e_j and -e_i.
        let mut cur = y.clone();
        while cur != *z {
            if cur[i] - z[i] >= cur[j] - z[j] {
                cur[i] -= 1;
            } else {
                cur[j] -= 1;
            }
            path.push(cur.clone());
        }
        paths.push(path.iter().map(|p| reflect(p)).collect());
    }
    Ok(PathBundle {
        paths,
        length_bound: (2 * d) as f64 * k as f64,
        multiplicity_bound: chi * (spread as f64 / k as f64).powi(d as i32 - 1) + 4f64.powi(d as i32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digital_paths_hug_the_segment() {
        let cases = [(vec![0, 0, 0], vec![7, -3, 5]), (vec![2, 2, 2], vec![2, 2, 2]), (vec![0, 0], vec![-9, 1])];
        for (x, y) in cases {
            let p = digital_path(&x, &y);
            assert_eq!(p.len() as i64 - 1, l1(&x, &y));
            assert_eq!(p.last().unwrap(), &y);
            assert!(p.iter().all(|v| near_segment(v, &x, &y)));
        }
        assert!(!near_segment(&[0, 2], &[0, 0], &[5, 0]));
    }

    #[test]
    fn aligned_pairs_give_straight_paths() {
        let s1 = PointSet::new(3, vec![vec![0, 0, 0], vec![0, 3, 0]]).unwrap();
        let s2 = PointSet::new(3, vec![vec![4, 0, 0], vec![4, 3, 0]]).unwrap();
        let b = disjoint_path_bundle(&s1, &s2, BundleGeometry::Parallel { axis: 0, ell: 4, spread: 4 }, default_chi(3))
            .unwrap();
        assert_eq!(b.paths.len(), 1);
        assert_eq!(b.max_multiplicity(), 1);
        assert_eq!(b.max_length(), 4);
        assert!(b.verify(&s1, &s2).pass);
    }

    #[test]
    fn perpendicular_bundle_lands_in_both_sets() {
        let k = 6;
        let s1 = PointSet::new(3, (0..6).map(|t| vec![0, -t, t - 3])).unwrap();
        let s2 = PointSet::new(3, (0..6).map(|t| vec![-t, 0, 2 - t])).unwrap();
        let b = disjoint_path_bundle(&s1, &s2, BundleGeometry::Perpendicular { i: 0, j: 1, spread: k }, default_chi(3))
            .unwrap();
        assert_eq!(b.paths.len(), 3);
        assert!(b.verify(&s1, &s2).pass, "{:?}", b.verify(&s1, &s2));
    }

    #[test]
    fn plane_is_unsupported() {
        let s = PointSet::new(2, vec![vec![0, 0]]).unwrap();
        let g = BundleGeometry::Parallel { axis: 0, ell: 1, spread: 1 };
        assert_eq!(disjoint_path_bundle(&s, &s, g, 1.0), Err(CombinatoricsError::UnsupportedDimension(2)));
    }
}
