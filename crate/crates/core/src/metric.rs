//! Chemical distance: layered breadth-first ball growth, point and set
//! distances, distances constrained to a region, and geodesics with a fixed
//! tie-breaking rule.
//!
//! A ball that reaches a face of its box is *contaminated*: paths leaving the
//! box are invisible, so only the layers up to and including the first face
//! contact are guaranteed to agree with the infinite lattice. Any shortcut
//! through the outside must first reach a face vertex, which cannot happen
//! earlier than that contact time.

use std::io::{self, Write};

use bitvec::prelude::*;
use thiserror::Error;

use crate::lattice::{BoxSpec, PercolationSample};

/// Sentinel for unreachable vertices.
pub const INF: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("vertex {0} is outside the box")]
    OutsideBox(usize),
    #[error("point {0:?} is outside the box")]
    PointOutsideBox(Vec<i64>),
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("target {0} is not reachable from the source")]
    Unreachable(usize),
    #[error("endpoint set is not contained in the region")]
    EndpointOutsideRegion,
}

/// Result of a breadth-first ball growth.
#[derive(Debug, Clone)]
pub struct BallGrowth {
    sources: Vec<usize>,
    dist: Vec<u32>,
    /// Reached vertices, layer by layer, each layer sorted by index.
    order: Vec<usize>,
    /// `order[layer_starts[t]..layer_starts[t + 1]]` is layer `t`.
    layer_starts: Vec<usize>,
    touch_time: Option<u32>,
    exhausted: bool,
}

impl BallGrowth {
    pub fn source(&self) -> usize {
        self.sources[0]
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Number of layers grown (the last index is `layer_count() - 1`).
    pub fn layer_count(&self) -> usize {
        self.layer_starts.len() - 1
    }

    /// Largest time for which the layer was computed.
    pub fn max_time(&self) -> u32 {
        (self.layer_count() - 1) as u32
    }

    pub fn layer(&self, t: u32) -> &[usize] {
        let t = t as usize;
        if t >= self.layer_count() {
            return &[];
        }
        &self.order[self.layer_starts[t]..self.layer_starts[t + 1]]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layer_starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `|B_t|`, saturating at the grown ball.
    pub fn ball_size(&self, t: u32) -> usize {
        let t = (t as usize).min(self.layer_count() - 1);
        self.layer_starts[t + 1]
    }

    /// All reached vertices in layer order.
    pub fn reached(&self) -> &[usize] {
        &self.order
    }

    pub fn dist(&self, v: usize) -> Option<u32> {
        self.dist.get(v).copied().filter(|&d| d != INF)
    }

    pub fn dist_map(&self) -> &[u32] {
        &self.dist
    }

    /// First time a layer met a face of the box.
    pub fn touch_time(&self) -> Option<u32> {
        self.touch_time
    }

    pub fn contaminated(&self) -> bool {
        self.touch_time.is_some()
    }

    /// Whether the growth stopped because no new vertex was reachable.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Largest `t` such that layers `0..=t` are known to agree with the
    /// infinite lattice, or `None` if every layer does (the ball is finite and
    /// never met a face).
    pub fn exact_limit(&self) -> Option<u32> {
        match self.touch_time {
            Some(t) => Some(t),
            None if self.exhausted => None,
            None => Some(self.max_time()),
        }
    }

    /// Lexicographically least neighbour one step closer to the sources,
    /// which is the least vertex index among such neighbours.
    pub fn predecessor(&self, sample: &PercolationSample, v: usize) -> Option<usize> {
        let d = self.dist(v)?;
        if d == 0 {
            return None;
        }
        sample.open_neighbors(v).find(|&u| self.dist[u] == d - 1)
    }
}

/// Breadth-first growth from `sources`, restricted to vertices allowed by
/// `region` when given. Stops after layer `t_max`, when the ball is exhausted,
/// or after the first layer containing a vertex of `stop_at`.
pub(crate) fn grow_from(
    sample: &PercolationSample,
    sources: &[usize],
    region: Option<&BitSlice>,
    t_max: Option<u32>,
    stop_at: Option<&BitSlice>,
) -> BallGrowth {
    let spec = sample.spec();
    let n = spec.vertex_count();
    let masks = sample.open_masks();
    let strides = spec.strides();
    let dim = spec.dim();
    let mut dist = vec![INF; n];
    let mut order: Vec<usize> = Vec::new();
    for &s in sources {
        if dist[s] == INF {
            dist[s] = 0;
            order.push(s);
        }
    }
    order.sort_unstable();
    let mut layer_starts = vec![0, order.len()];
    let mut touch_time = order.iter().any(|&v| spec.is_face_vertex(v)).then_some(0);
    let mut hit = stop_at.is_some_and(|t| order.iter().any(|&v| t[v]));
    let mut exhausted = order.is_empty();
    let mut t = 0u32;
    while !hit && !exhausted && t_max.is_none_or(|m| t < m) {
        let start = layer_starts[layer_starts.len() - 2];
        let end = order.len();
        for i in start..end {
            let v = order[i];
            let mask = masks[v];
            for a in 0..dim {
                if (mask >> (2 * a)) & 1 == 1 {
                    visit(v + strides[a], t + 1, &mut dist, &mut order, region);
                }
                if (mask >> (2 * a + 1)) & 1 == 1 {
                    visit(v - strides[a], t + 1, &mut dist, &mut order, region);
                }
            }
        }
        if order.len() == end {
            exhausted = true;
            break;
        }
        t += 1;
        order[end..].sort_unstable();
        layer_starts.push(order.len());
        if touch_time.is_none() && order[end..].iter().any(|&v| spec.is_face_vertex(v)) {
            touch_time = Some(t);
        }
        if let Some(target) = stop_at {
            hit = order[end..].iter().any(|&v| target[v]);
        }
    }
    BallGrowth { sources: sources.to_vec(), dist, order, layer_starts, touch_time, exhausted }
}

#[inline]
fn visit(u: usize, d: u32, dist: &mut [u32], order: &mut Vec<usize>, region: Option<&BitSlice>) {
    if dist[u] == INF && region.is_none_or(|r| r[u]) {
        dist[u] = d;
        order.push(u);
    }
}

fn check_vertex(spec: &BoxSpec, v: usize) -> Result<(), MetricError> {
    if v < spec.vertex_count() {
        Ok(())
    } else {
        Err(MetricError::OutsideBox(v))
    }
}

/// Grows `B_t(source)` layer by layer up to `t_max` (or exhaustion).
pub fn grow_ball(sample: &PercolationSample, source: usize, t_max: Option<u32>) -> Result<BallGrowth, MetricError> {
    check_vertex(sample.spec(), source)?;
    Ok(grow_from(sample, &[source], None, t_max, None))
}

/// Distance together with the contamination flag of the growth that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Distance {
    pub value: Option<u32>,
    /// The growth met a face before the answer was settled, so the infinite
    /// lattice distance may be smaller (or finite when this is `None`).
    pub contaminated: bool,
}

impl Distance {
    fn from_ball(ball: &BallGrowth, value: Option<u32>) -> Self {
        let contaminated = match (ball.touch_time(), value) {
            (None, _) => false,
            (Some(tc), Some(d)) => d > tc,
            (Some(_), None) => true,
        };
        Self { value, contaminated }
    }
}

pub fn chemical_distance(sample: &PercolationSample, x: usize, y: usize) -> Result<Distance, MetricError> {
    set_distance(sample, &[x], &[y])
}

/// Distance between real points, each floored componentwise first.
pub fn chemical_distance_real(sample: &PercolationSample, x: &[f64], y: &[f64]) -> Result<Distance, MetricError> {
    let spec = sample.spec();
    let u = floor_point(spec, x)?;
    let v = floor_point(spec, y)?;
    chemical_distance(sample, u, v)
}

/// Vertex index of `floor(x)`.
pub fn floor_point(spec: &BoxSpec, x: &[f64]) -> Result<usize, MetricError> {
    if x.len() != spec.dim() {
        return Err(MetricError::Dimension { expected: spec.dim(), got: x.len() });
    }
    let p: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
    spec.index_of(&p).ok_or(MetricError::PointOutsideBox(p))
}

/// `D(B, C)`: least distance from a vertex of `from` to a vertex of `to`.
/// Empty sets give an infinite distance.
pub fn set_distance(sample: &PercolationSample, from: &[usize], to: &[usize]) -> Result<Distance, MetricError> {
    let spec = sample.spec();
    for &v in from.iter().chain(to) {
        check_vertex(spec, v)?;
    }
    if from.is_empty() || to.is_empty() {
        return Ok(Distance { value: None, contaminated: false });
    }
    let target = vertex_set(spec, to);
    let ball = grow_from(sample, from, None, None, Some(&target));
    let value = to.iter().filter_map(|&v| ball.dist(v)).min();
    Ok(Distance::from_ball(&ball, value))
}

/// Decides `D(from, to) > threshold` on the infinite lattice, counting an
/// infinite distance as exceeding, or `None` when the box cannot tell.
///
/// A path that leaves the box first reaches a face vertex from `from` and
/// last leaves one towards `to`, so it is at least `h_from + h_to + 2` long,
/// where `h` is the in-box distance from a set to the faces.
pub fn exceeds_within_box(
    sample: &PercolationSample,
    from: &[usize],
    to: &[usize],
    threshold: u32,
) -> Result<Option<bool>, MetricError> {
    let spec = sample.spec();
    for &v in from.iter().chain(to) {
        check_vertex(spec, v)?;
    }
    if from.is_empty() || to.is_empty() {
        return Ok(Some(true));
    }
    let target = vertex_set(spec, to);
    let ball = grow_from(sample, from, None, Some(threshold), Some(&target));
    if to.iter().any(|&v| ball.dist(v).is_some()) {
        // Within the threshold inside the box, hence also outside it.
        return Ok(Some(false));
    }
    let Some(h_from) = ball.touch_time() else {
        // B_threshold(from) never met a face, so it is the infinite-lattice ball.
        return Ok(Some(true));
    };
    // Exceeds iff every exit path is too long: h_to >= threshold - h_from - 1.
    let Some(need) = threshold.checked_sub(h_from + 1) else { return Ok(Some(true)) };
    if need == 0 {
        return Ok(Some(true));
    }
    let back = grow_from(sample, to, None, Some(need - 1), None);
    Ok(back.touch_time().is_none().then_some(true))
}

/// A set of vertices of a box, stored as a bitmask over vertex indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    bits: BitVec,
}

impl Region {
    pub fn empty(spec: &BoxSpec) -> Self {
        Self { bits: bitvec![0; spec.vertex_count()] }
    }

    pub fn full(spec: &BoxSpec) -> Self {
        Self { bits: bitvec![1; spec.vertex_count()] }
    }

    pub fn from_vertices(spec: &BoxSpec, vertices: &[usize]) -> Self {
        Self { bits: vertex_set(spec, vertices) }
    }

    pub fn from_predicate(spec: &BoxSpec, mut keep: impl FnMut(&[i64]) -> bool) -> Self {
        let mut bits = bitvec![0; spec.vertex_count()];
        let mut x = vec![0; spec.dim()];
        for v in 0..spec.vertex_count() {
            spec.write_coords(v, &mut x);
            if keep(&x) {
                bits.set(v, true);
            }
        }
        Self { bits }
    }

    pub fn insert(&mut self, v: usize) {
        self.bits.set(v, true);
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits.get(v).is_some_and(|b| *b)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.not_any()
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn union_with(&mut self, other: &Region) {
        self.bits |= &other.bits;
    }

    pub fn bits(&self) -> &BitSlice {
        &self.bits
    }
}

fn vertex_set(spec: &BoxSpec, vertices: &[usize]) -> BitVec {
    let mut bits = bitvec![0; spec.vertex_count()];
    for &v in vertices {
        bits.set(v, true);
    }
    bits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstrainedDistance {
    Finite(u32),
    Unreachable,
    /// `from` or `to` was empty.
    EmptyEndpoint,
}

/// `D_A(B, C)`: shortest open path from `from` to `to` using only vertices
/// of `region`.
pub fn constrained_distance(
    sample: &PercolationSample,
    region: &Region,
    from: &[usize],
    to: &[usize],
) -> Result<ConstrainedDistance, MetricError> {
    Ok(match constrained_ball(sample, region, from, to)? {
        None => ConstrainedDistance::EmptyEndpoint,
        Some((ball, _)) => match to.iter().filter_map(|&v| ball.dist(v)).min() {
            Some(d) => ConstrainedDistance::Finite(d),
            None => ConstrainedDistance::Unreachable,
        },
    })
}

/// Growth inside `region` from `from`, stopped at the first layer meeting
/// `to`, plus the least-index reached vertex of `to` at minimal distance.
pub(crate) fn constrained_ball(
    sample: &PercolationSample,
    region: &Region,
    from: &[usize],
    to: &[usize],
) -> Result<Option<(BallGrowth, Option<usize>)>, MetricError> {
    let spec = sample.spec();
    for &v in from.iter().chain(to) {
        check_vertex(spec, v)?;
        if !region.contains(v) {
            return Err(MetricError::EndpointOutsideRegion);
        }
    }
    if from.is_empty() || to.is_empty() {
        return Ok(None);
    }
    let target = vertex_set(spec, to);
    let ball = grow_from(sample, from, Some(region.bits()), None, Some(&target));
    let best = to.iter().filter_map(|&v| ball.dist(v).map(|d| (d, v))).min().map(|(_, v)| v);
    Ok(Some((ball, best)))
}

/// Geodesic from the source to `target`, following the lexicographically
/// least predecessor at every step. Returned source first.
pub fn geodesic(sample: &PercolationSample, ball: &BallGrowth, target: usize) -> Result<Vec<usize>, MetricError> {
    let d = ball.dist(target).ok_or(MetricError::Unreachable(target))?;
    let mut path = Vec::with_capacity(d as usize + 1);
    let mut v = target;
    path.push(v);
    while let Some(u) = ball.predecessor(sample, v) {
        path.push(u);
        v = u;
    }
    path.reverse();
    debug_assert_eq!(path.len(), d as usize + 1);
    Ok(path)
}

/// Least `t` with `|B_t| >= volume`. `None` when the grown ball never gets
/// there, which for an exhausted ball means the threshold is infinite.
pub fn volume_threshold_time(ball: &BallGrowth, volume: usize) -> Option<u32> {
    let starts = &ball.layer_starts[1..];
    let t = starts.partition_point(|&size| size < volume);
    (t < starts.len()).then_some(t as u32)
}

/// Writes `x1,..,xd,dist` rows for every box vertex in index order, with
/// `inf` for unreached vertices.
pub fn write_distance_map<W: Write>(spec: &BoxSpec, ball: &BallGrowth, mut out: W) -> io::Result<()> {
    let header: Vec<String> = (1..=spec.dim()).map(|a| format!("x{a}")).collect();
    writeln!(out, "{},dist", header.join(","))?;
    let mut x = vec![0; spec.dim()];
    for v in 0..spec.vertex_count() {
        spec.write_coords(v, &mut x);
        for c in &x {
            write!(out, "{c},")?;
        }
        match ball.dist(v) {
            Some(d) => writeln!(out, "{d}")?,
            None => writeln!(out, "inf")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::sample_configuration;

    fn origin(spec: &BoxSpec) -> usize {
        spec.index_of(&vec![0; spec.dim()]).unwrap()
    }

    #[test]
    fn open_lattice_gives_l1_spheres() {
        let spec = BoxSpec::new(2, 5).unwrap();
        let s = PercolationSample::all_open(&spec);
        let ball = grow_ball(&s, origin(&spec), Some(2)).unwrap();
        assert_eq!(ball.layer_sizes(), vec![1, 4, 8]);
        assert!(!ball.contaminated());
        assert!(!ball.exhausted());
    }

    #[test]
    fn closed_lattice_gives_singleton() {
        let spec = BoxSpec::new(2, 3).unwrap();
        let s = PercolationSample::all_closed(&spec);
        let o = origin(&spec);
        let ball = grow_ball(&s, o, None).unwrap();
        assert_eq!(ball.layer_sizes(), vec![1]);
        assert!(ball.exhausted());
        assert_eq!(ball.exact_limit(), None);
        assert!((0..spec.vertex_count()).all(|v| v == o || ball.dist(v).is_none()));
    }

    #[test]
    fn straight_path_distance() {
        let spec = BoxSpec::new(2, 6).unwrap();
        let s = PercolationSample::from_rule(&spec, |u, v| u[1] == 0 && v[1] == 0 && u[0] >= 0 && v[0] <= 5);
        let x = origin(&spec);
        let y = spec.index_of(&[5, 0]).unwrap();
        let d = chemical_distance(&s, x, y).unwrap();
        assert_eq!(d, Distance { value: Some(5), contaminated: false });
        let z = spec.index_of(&[0, 1]).unwrap();
        assert_eq!(chemical_distance(&s, x, z).unwrap().value, None);
        let ball = grow_ball(&s, x, None).unwrap();
        let path = geodesic(&s, &ball, y).unwrap();
        let expected: Vec<usize> = (0..=5).map(|i| spec.index_of(&[i, 0]).unwrap()).collect();
        assert_eq!(path, expected);
    }

    #[test]
    fn staircase_geodesic_takes_least_predecessor() {
        let spec = BoxSpec::new(2, 4).unwrap();
        let s = PercolationSample::all_open(&spec);
        let ball = grow_ball(&s, origin(&spec), None).unwrap();
        let target = spec.index_of(&[2, 1]).unwrap();
        let path: Vec<Vec<i64>> = geodesic(&s, &ball, target).unwrap().into_iter().map(|v| spec.coords_of(v)).collect();
        // Predecessor of (2,1) is (1,1) < (2,0); of (1,1) it is (0,1) < (1,0).
        assert_eq!(path, vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![2, 1]]);
    }

    #[test]
    fn volume_threshold_matches_ball_sizes() {
        let spec = BoxSpec::new(2, 5).unwrap();
        let s = PercolationSample::all_open(&spec);
        let ball = grow_ball(&s, origin(&spec), Some(3)).unwrap();
        assert_eq!(volume_threshold_time(&ball, 1), Some(0));
        assert_eq!(volume_threshold_time(&ball, 5), Some(1));
        assert_eq!(volume_threshold_time(&ball, 6), Some(2));
        assert_eq!(volume_threshold_time(&ball, 26), None);
    }

    #[test]
    fn contamination_flags_face_contact() {
        let spec = BoxSpec::new(2, 3).unwrap();
        let s = PercolationSample::all_open(&spec);
        let ball = grow_ball(&s, origin(&spec), None).unwrap();
        assert_eq!(ball.touch_time(), Some(3));
        assert_eq!(ball.exact_limit(), Some(3));
        let far = spec.index_of(&[3, 3]).unwrap();
        assert!(chemical_distance(&s, origin(&spec), far).unwrap().contaminated);
        let near = spec.index_of(&[1, 1]).unwrap();
        assert!(!chemical_distance(&s, origin(&spec), near).unwrap().contaminated);
    }

    #[test]
    fn constrained_distance_on_a_line() {
        let spec = BoxSpec::new(2, 5).unwrap();
        let s = PercolationSample::all_open(&spec);
        let line = Region::from_predicate(&spec, |x| x[1] == 0);
        let x = spec.index_of(&[-3, 0]).unwrap();
        let y = spec.index_of(&[4, 0]).unwrap();
        assert_eq!(constrained_distance(&s, &line, &[x], &[y]).unwrap(), ConstrainedDistance::Finite(7));
        let cut = s.with_edges(&[spec.edge_between(origin(&spec), origin(&spec) + spec.strides()[0]).unwrap()], &[]).unwrap();
        assert_eq!(constrained_distance(&cut, &line, &[x], &[y]).unwrap(), ConstrainedDistance::Unreachable);
        assert_eq!(constrained_distance(&s, &line, &[], &[y]).unwrap(), ConstrainedDistance::EmptyEndpoint);
        let off = spec.index_of(&[0, 1]).unwrap();
        assert_eq!(constrained_distance(&s, &line, &[off], &[y]), Err(MetricError::EndpointOutsideRegion));
    }

    #[test]
    fn real_points_are_floored() {
        let spec = BoxSpec::new(2, 5).unwrap();
        let s = PercolationSample::all_open(&spec);
        let d = chemical_distance_real(&s, &[0.2, -0.5], &[2.9, 1.0]).unwrap();
        assert_eq!(d.value, Some(2 + 2));
    }

    #[test]
    fn distance_map_csv_shape() {
        let spec = BoxSpec::new(2, 1).unwrap();
        let s = sample_configuration(&spec, 0.5, 3).unwrap();
        let ball = grow_ball(&s, origin(&spec), None).unwrap();
        let mut out = Vec::new();
        write_distance_map(&spec, &ball, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,dist");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[5], "0,0,0");
    }
}
