//! Finite point sets, projections along axes and coordinate-distinct
//! subsets.

use std::collections::{BTreeMap, BTreeSet};

use super::assignment::max_bipartite_matching;
use super::{Check, CombinatoricsError};

/// A finite set of points of `Z^d`, stored sorted and deduplicated, with
/// per-axis extents cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<i64>>,
    diam_axes: Vec<i64>,
}

impl PointSet {
    pub fn new(dim: usize, points: impl IntoIterator<Item = Vec<i64>>) -> Result<Self, CombinatoricsError> {
        if dim == 0 {
            return Err(CombinatoricsError::UnsupportedDimension(0));
        }
        let set: BTreeSet<Vec<i64>> = points.into_iter().collect();
        if set.iter().any(|p| p.len() != dim) {
            return Err(CombinatoricsError::Dimension);
        }
        let points: Vec<Vec<i64>> = set.into_iter().collect();
        let diam_axes = (0..dim)
            .map(|a| {
                let lo = points.iter().map(|p| p[a]).min();
                let hi = points.iter().map(|p| p[a]).max();
                match (lo, hi) {
                    (Some(l), Some(h)) => h - l,
                    _ => 0,
                }
            })
            .collect();
        Ok(Self { dim, points, diam_axes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.points.binary_search_by(|p| p.as_slice().cmp(x)).is_ok()
    }

    pub fn diam_axis(&self, axis: usize) -> i64 {
        self.diam_axes[axis]
    }

    pub fn diam(&self) -> i64 {
        self.diam_axes.iter().copied().max().unwrap_or(0)
    }

    /// `P_axis(S)`: drop coordinate `axis` and deduplicate.
    pub fn projection(&self, axis: usize) -> Vec<Vec<i64>> {
        let set: BTreeSet<Vec<i64>> = self.points.iter().map(|p| drop_axis(p, axis)).collect();
        set.into_iter().collect()
    }
}

fn drop_axis(p: &[i64], axis: usize) -> Vec<i64> {
    p.iter().enumerate().filter(|&(a, _)| a != axis).map(|(_, &v)| v).collect()
}

fn insert_axis(p: &[i64], axis: usize, value: i64) -> Vec<i64> {
    let mut out = p.to_vec();
    out.insert(axis, value);
    out
}

/// `c >= n^(1/3)`, exactly.
fn at_least_cube_root(c: usize, n: usize) -> bool {
    (c as u128).pow(3) >= n as u128
}

/// `c >= n^(2/3) / 2`, exactly.
fn meets_projection_bound(c: usize, n: usize) -> bool {
    (2 * c as u128).pow(3) >= (n as u128).pow(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    /// Axis chosen by the fibre case analysis.
    CaseAnalysis,
    /// Axis chosen as the exhaustive maximum over all axes.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub axis: usize,
    pub projected: Vec<Vec<i64>>,
    pub set_size: usize,
    pub method: ProjectionMethod,
}

impl ProjectionResult {
    /// `|P_axis(S)| >= |S|^(2/3) / 2`.
    pub fn verify(&self) -> Check {
        Check {
            bound: (self.set_size as f64).powf(2.0 / 3.0) / 2.0,
            achieved: self.projected.len() as f64,
            pass: meets_projection_bound(self.projected.len(), self.set_size),
        }
    }
}

/// An axis whose projection has at least `|S|^(2/3)/2` points.
///
/// For `d >= 3` the axis comes from the fibre argument on the first three
/// axes: use axis 1 if its projection is large; otherwise the fibres of
/// `P_1` with at least `n^(1/3)` points project under `P_2` either to a
/// large set (axis 2) or to few points, one of which has a heavy fibre
/// whose points are distinct in the first two coordinates (axis 3). If
/// that choice misses the bound, or `d = 2` where no such argument is
/// available, the best axis over all `d` is returned instead.
pub fn projection_best(set: &PointSet) -> Result<ProjectionResult, CombinatoricsError> {
    if set.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    let n = set.len();
    if set.dim() == 1 {
        return Ok(ProjectionResult { axis: 0, projected: vec![vec![]], set_size: n, method: ProjectionMethod::Exhaustive });
    }
    if set.dim() >= 3 {
        let axis = case_analysis_axis(set);
        let projected = set.projection(axis);
        if meets_projection_bound(projected.len(), n) {
            return Ok(ProjectionResult { axis, projected, set_size: n, method: ProjectionMethod::CaseAnalysis });
        }
    }
    let (axis, projected) = (0..set.dim())
        .map(|a| (a, set.projection(a)))
        .max_by(|(a, p), (b, q)| p.len().cmp(&q.len()).then(b.cmp(a)))
        .expect("dim >= 1");
    Ok(ProjectionResult { axis, projected, set_size: n, method: ProjectionMethod::Exhaustive })
}

fn case_analysis_axis(set: &PointSet) -> usize {
    let n = set.len();
    let mut fibres: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for p in set.points() {
        *fibres.entry(drop_axis(p, 0)).or_default() += 1;
    }
    if meets_projection_bound(fibres.len(), n) {
        return 0;
    }
    // Heavy fibres of P_1, then their images under P_2 (coordinate 2 is at
    // position 0 once coordinate 1 is dropped).
    let second: BTreeSet<Vec<i64>> = fibres
        .iter()
        .filter(|&(_, &c)| at_least_cube_root(c, n))
        .map(|(z, _)| drop_axis(z, 0))
        .collect();
    if at_least_cube_root(second.len(), n) {
        1
    } else {
        2
    }
}

/// `m(d, S) = (|S| / (2^(d-1) Diam(S)))^(1/(d-1))`; `None` when
/// `Diam(S) = 0`.
pub fn m_bound(set: &PointSet) -> Option<f64> {
    let diam = set.diam();
    if diam == 0 || set.dim() < 2 {
        return None;
    }
    let d = set.dim() as f64;
    Some((set.len() as f64 / (2f64.powf(d - 1.0) * diam as f64)).powf(1.0 / (d - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetMethod {
    /// `Diam(S) = 0`: a single point.
    Singleton,
    /// Greedy removal of the two hyperplanes through a chosen point.
    Greedy,
    /// Descent to a heavy hyperplane slice of one lower dimension.
    Descent,
    /// Exact maximum over all axis pairs by bipartite matching.
    Matching,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistinctSubset {
    pub i: usize,
    pub j: usize,
    pub points: Vec<Vec<i64>>,
    /// `m(d, S)`, or 1 in the singleton case.
    pub bound: f64,
    pub method: SubsetMethod,
}

impl DistinctSubset {
    /// Size bound and pairwise distinctness in coordinates `i` and `j`.
    pub fn verify(&self, set: &PointSet) -> Check {
        let distinct_i: BTreeSet<i64> = self.points.iter().map(|p| p[self.i]).collect();
        let distinct_j: BTreeSet<i64> = self.points.iter().map(|p| p[self.j]).collect();
        let pass = self.i != self.j
            && distinct_i.len() == self.points.len()
            && distinct_j.len() == self.points.len()
            && self.points.iter().all(|p| set.contains(p))
            && self.points.len() as f64 >= self.bound - 1e-9;
        Check { bound: self.bound, achieved: self.points.len() as f64, pass }
    }
}

/// A subset of `S` whose points are pairwise distinct in two coordinates
/// `i != j`, with at least `m(d, S)` points.
///
/// Built greedily: pick a point, discard everything sharing its coordinate
/// `d-1` or `d`, repeat. If too few points are picked, some removed
/// hyperplane slice holds at least `|S|/(2m)` points and the construction
/// recurses on that slice in one dimension less. In the plane the greedy
/// bound can fall short by one line, so the exact maximum (a bipartite
/// matching between coordinate values) is the final fallback.
pub fn distinct_coordinate_subset(set: &PointSet) -> Result<DistinctSubset, CombinatoricsError> {
    if set.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    if set.dim() < 2 {
        return Err(CombinatoricsError::UnsupportedDimension(set.dim()));
    }
    let Some(bound) = m_bound(set) else {
        return Ok(DistinctSubset {
            i: 0,
            j: 1,
            points: vec![set.points()[0].clone()],
            bound: 1.0,
            method: SubsetMethod::Singleton,
        });
    };
    let found = descend(set)?;
    if found.points.len() as f64 >= bound - 1e-9 {
        return Ok(DistinctSubset { bound, ..found });
    }
    let (i, j, points) = best_pair_matching(set);
    Ok(DistinctSubset { i, j, points, bound, method: SubsetMethod::Matching })
}

fn descend(set: &PointSet) -> Result<DistinctSubset, CombinatoricsError> {
    let d = set.dim();
    let Some(m) = m_bound(set) else {
        return Ok(DistinctSubset {
            i: 0,
            j: 1,
            points: vec![set.points()[0].clone()],
            bound: 1.0,
            method: SubsetMethod::Singleton,
        });
    };
    let (a, b) = (d - 2, d - 1);
    let chosen = greedy_pick(set.points(), a, b);
    if chosen.len() as f64 >= m - 1e-9 || d == 2 {
        return Ok(DistinctSubset { i: a, j: b, points: chosen, bound: m, method: SubsetMethod::Greedy });
    }
    // The heaviest slice x_r = v_r over picked v and r in {a, b}.
    let mut best: Option<(usize, usize, i64)> = None;
    for v in &chosen {
        for r in [a, b] {
            let count = set.points().iter().filter(|p| p[r] == v[r]).count();
            if best.is_none_or(|(c, _, _)| count > c) {
                best = Some((count, r, v[r]));
            }
        }
    }
    let (_, r, value) = best.expect("at least one point picked");
    let slice = PointSet::new(d - 1, set.points().iter().filter(|p| p[r] == value).map(|p| drop_axis(p, r)))?;
    let sub = descend(&slice)?;
    let lift = |axis: usize| if axis >= r { axis + 1 } else { axis };
    Ok(DistinctSubset {
        i: lift(sub.i),
        j: lift(sub.j),
        points: sub.points.iter().map(|p| insert_axis(p, r, value)).collect(),
        bound: m,
        method: if sub.method == SubsetMethod::Singleton { SubsetMethod::Singleton } else { SubsetMethod::Descent },
    })
}

fn greedy_pick(points: &[Vec<i64>], a: usize, b: usize) -> Vec<Vec<i64>> {
    let mut used_a = BTreeSet::new();
    let mut used_b = BTreeSet::new();
    let mut chosen = Vec::new();
    for p in points {
        if !used_a.contains(&p[a]) && !used_b.contains(&p[b]) {
            used_a.insert(p[a]);
            used_b.insert(p[b]);
            chosen.push(p.clone());
        }
    }
    chosen
}

/// The largest subset distinct in some pair of coordinates, exactly.
fn best_pair_matching(set: &PointSet) -> (usize, usize, Vec<Vec<i64>>) {
    let d = set.dim();
    let mut best: (usize, usize, Vec<Vec<i64>>) = (0, 1, Vec::new());
    for i in 0..d {
        for j in i + 1..d {
            let points = pair_matching(set.points(), i, j);
            if points.len() > best.2.len() {
                best = (i, j, points);
            }
        }
    }
    best
}

fn pair_matching(points: &[Vec<i64>], i: usize, j: usize) -> Vec<Vec<i64>> {
    let left: Vec<i64> = points.iter().map(|p| p[i]).collect::<BTreeSet<_>>().into_iter().collect();
    let right: Vec<i64> = points.iter().map(|p| p[j]).collect::<BTreeSet<_>>().into_iter().collect();
    let mut adj = vec![Vec::new(); left.len()];
    let mut witness = BTreeMap::new();
    for p in points {
        let l = left.binary_search(&p[i]).expect("present");
        let r = right.binary_search(&p[j]).expect("present");
        if witness.insert((l, r), p.clone()).is_none() {
            adj[l].push(r);
        }
    }
    max_bipartite_matching(&adj, right.len()).into_iter().map(|lr| witness[&lr].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: i64) -> PointSet {
        PointSet::new(2, (0..k).flat_map(|a| (0..k).map(move |b| vec![a, b]))).unwrap()
    }

    #[test]
    fn point_set_dedups_and_measures() {
        let s = PointSet::new(2, vec![vec![0, 0], vec![3, 1], vec![0, 0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s.diam_axis(0), s.diam_axis(1), s.diam()), (3, 1, 3));
        assert!(PointSet::new(2, vec![vec![0]]).is_err());
    }

    #[test]
    fn collinear_points_project_fully() {
        let s = PointSet::new(3, (0..10).map(|a| vec![a, 0, 0])).unwrap();
        let r = projection_best(&s).unwrap();
        assert_ne!(r.axis, 0);
        assert_eq!(r.projected.len(), 10);
        assert!(r.verify().pass);
    }

    #[test]
    fn single_point_projection() {
        let s = PointSet::new(3, vec![vec![1, 2, 3]]).unwrap();
        assert_eq!(projection_best(&s).unwrap().projected.len(), 1);
    }

    #[test]
    fn cube_uses_case_analysis() {
        let s = PointSet::new(3, (0..64).map(|i| vec![i % 4, (i / 4) % 4, i / 16])).unwrap();
        let r = projection_best(&s).unwrap();
        assert_eq!(r.method, ProjectionMethod::CaseAnalysis);
        assert_eq!(r.projected.len(), 16);
        assert!(r.verify().pass);
    }

    #[test]
    fn large_planar_grid_defeats_the_projection_bound() {
        // |P_i| = 9 < 81^(2/3)/2 ~ 9.36 for either axis.
        let r = projection_best(&grid(9)).unwrap();
        assert!(!r.verify().pass);
        assert!(projection_best(&grid(8)).unwrap().verify().pass);
    }

    #[test]
    fn grid_subset_beats_bound() {
        for k in 2..10 {
            let s = grid(k);
            let r = distinct_coordinate_subset(&s).unwrap();
            assert!(r.verify(&s).pass, "k = {k}");
            // A diagonal of size k also certifies.
            assert!(k as f64 >= r.bound);
        }
    }

    #[test]
    fn singleton_subset() {
        let s = PointSet::new(3, vec![vec![4, 4, 4]]).unwrap();
        let r = distinct_coordinate_subset(&s).unwrap();
        assert_eq!(r.method, SubsetMethod::Singleton);
        assert!(r.verify(&s).pass);
    }

    #[test]
    fn planar_corner_needs_matching() {
        // Greedy takes the corner first and blocks everything else; the
        // bound is 9 / (2 * 4) > 1.
        let mut pts = vec![vec![0, 0]];
        for t in 1..=4 {
            pts.extend([vec![t, 0], vec![0, t]]);
        }
        let s = PointSet::new(2, pts).unwrap();
        let r = distinct_coordinate_subset(&s).unwrap();
        assert_eq!(r.method, SubsetMethod::Matching);
        assert!(r.verify(&s).pass);
    }

    #[test]
    fn slab_descends() {
        // Everything in the plane x_3 = 0: greedy on (x_2, x_3) picks one
        // point per x_2 value only.
        let s = PointSet::new(3, (0..100).map(|i| vec![i % 10, i / 10, 0])).unwrap();
        let r = distinct_coordinate_subset(&s).unwrap();
        assert!(r.verify(&s).pass);
    }
}
