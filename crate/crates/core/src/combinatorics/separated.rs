//! Non-crossing matchings between point sets on two parallel hyperplanes.

use super::assignment::min_cost_assignment;
use super::{Check, CombinatoricsError, PointSet};

/// Tolerance of the certified separation bound.
pub const SEPARATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedMatching {
    pub axis: usize,
    pub ell: i64,
    pub spread: i64,
    /// `sigma[a]` is the index in the second set matched to point `a` of
    /// the first.
    pub sigma: Vec<usize>,
    pub segments: Vec<(Vec<i64>, Vec<i64>)>,
    pub cost: f64,
    /// Least `l_2` distance between two distinct segments; infinite for a
    /// single segment.
    pub min_distance: f64,
}

impl SeparatedMatching {
    /// `l / (sqrt(2) K)`.
    pub fn guaranteed(&self) -> f64 {
        self.ell as f64 / (2f64.sqrt() * self.spread as f64)
    }

    /// Recomputes every pairwise segment distance and checks it against
    /// the guaranteed separation (which also rules out intersections).
    pub fn verify(&self) -> Check {
        let achieved = min_pairwise_distance(&self.segments);
        let bound = self.guaranteed();
        Check { bound, achieved, pass: achieved >= bound - SEPARATION_TOL && achieved > 0.0 }
    }
}

fn to_f64(p: &[i64]) -> Vec<f64> {
    p.iter().map(|&v| v as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean distance between the closed segments `[p1, q1]` and
/// `[p2, q2]`, by clamped closest-point parameters.
pub fn segment_distance(p1: &[i64], q1: &[i64], p2: &[i64], q2: &[i64]) -> f64 {
    let (p1, q1, p2, q2) = (to_f64(p1), to_f64(q1), to_f64(p2), to_f64(q2));
    let d1: Vec<f64> = q1.iter().zip(&p1).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = q2.iter().zip(&p2).map(|(a, b)| a - b).collect();
    let r: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        s = 0.0;
        t = 0.0;
    } else if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-12 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let mut sq = 0.0;
    for k in 0..p1.len() {
        let c1 = p1[k] + s * d1[k];
        let c2 = p2[k] + t * d2[k];
        sq += (c1 - c2) * (c1 - c2);
    }
    sq.sqrt()
}

fn min_pairwise_distance(segments: &[(Vec<i64>, Vec<i64>)]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..segments.len() {
        for b in a + 1..segments.len() {
            let (p1, q1) = &segments[a];
            let (p2, q2) = &segments[b];
            best = best.min(segment_distance(p1, q1, p2, q2));
        }
    }
    best
}

struct Instance<'a> {
    axis: usize,
    ell: i64,
    spread: i64,
    first: &'a [Vec<i64>],
    second: &'a [Vec<i64>],
}

fn check_hypotheses<'a>(
    s1: &'a PointSet,
    s2: &'a PointSet,
    axis: usize,
    ell: i64,
    spread: i64,
) -> Result<Instance<'a>, CombinatoricsError> {
    let bad = |msg: &str| Err(CombinatoricsError::Hypothesis(msg.to_string()));
    if s1.dim() != s2.dim() {
        return Err(CombinatoricsError::Dimension);
    }
    if axis >= s1.dim() {
        return bad("axis out of range");
    }
    if s1.len() != s2.len() {
        return bad("point sets differ in size");
    }
    if s1.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    if ell < 1 || ell > spread {
        return bad("need 1 <= l <= K");
    }
    let level = s1.points()[0][axis];
    if s1.points().iter().any(|p| p[axis] != level) || s2.points().iter().any(|p| p[axis] != level + ell) {
        return bad("points must lie on the hyperplanes x_axis = h and x_axis = h + l");
    }
    for x in s1.points() {
        for y in s2.points() {
            if crate::geometry::linf(x, y) > spread {
                return bad("l_inf spread exceeds K");
            }
        }
    }
    Ok(Instance { axis, ell, spread, first: s1.points(), second: s2.points() })
}

/// Cost of joining `x` to `y` after stretching the matching axis so that
/// the hyperplane gap equals `K`: the sum over the other axes `k` of the
/// length of the segment projected to the `(axis, k)` plane.
fn pair_cost(inst: &Instance, x: &[i64], y: &[i64]) -> f64 {
    let gap = inst.spread as f64;
    (0..x.len())
        .filter(|&k| k != inst.axis)
        .map(|k| {
            let delta = (x[k] - y[k]) as f64;
            (gap * gap + delta * delta).sqrt()
        })
        .sum()
}

fn cost_matrix(inst: &Instance) -> Vec<Vec<f64>> {
    inst.first.iter().map(|x| inst.second.iter().map(|y| pair_cost(inst, x, y)).collect()).collect()
}

fn finish(inst: &Instance, sigma: Vec<usize>, cost: f64) -> SeparatedMatching {
    let segments: Vec<(Vec<i64>, Vec<i64>)> =
        sigma.iter().enumerate().map(|(a, &b)| (inst.first[a].clone(), inst.second[b].clone())).collect();
    let min_distance = min_pairwise_distance(&segments);
    SeparatedMatching { axis: inst.axis, ell: inst.ell, spread: inst.spread, sigma, segments, cost, min_distance }
}

/// Matches `S1` on `x_axis = h` to `S2` on `x_axis = h + l` by an exact
/// minimum-cost assignment. Any pair of segments whose projections cross
/// in every `(axis, k)` plane could be uncrossed at strictly lower cost, so
/// the optimum keeps all segments at least `l / (sqrt(2) K)` apart.
pub fn separated_matching(
    s1: &PointSet,
    s2: &PointSet,
    axis: usize,
    ell: i64,
    spread: i64,
) -> Result<SeparatedMatching, CombinatoricsError> {
    let inst = check_hypotheses(s1, s2, axis, ell, spread)?;
    let matrix = cost_matrix(&inst);
    let (mut sigma, cost) = min_cost_assignment(&matrix);
    break_ties(&inst, &matrix, &mut sigma);
    Ok(finish(&inst, sigma, cost))
}

fn segment_of<'a>(inst: &'a Instance, sigma: &[usize], a: usize) -> (&'a [i64], &'a [i64]) {
    (&inst.first[a], &inst.second[sigma[a]])
}

fn too_close(inst: &Instance, sigma: &[usize], a: usize, b: usize, bound: f64) -> bool {
    let (p1, q1) = segment_of(inst, sigma, a);
    let (p2, q2) = segment_of(inst, sigma, b);
    segment_distance(p1, q1, p2, q2) < bound - SEPARATION_TOL
}

fn violations(inst: &Instance, sigma: &[usize], bound: f64) -> usize {
    let m = sigma.len();
    (0..m).map(|a| (a + 1..m).filter(|&b| too_close(inst, sigma, a, b, bound)).count()).sum()
}

/// The uncrossing argument is strict only when the projected segments meet
/// away from their endpoints. When two segments of an optimal assignment
/// meet at a shared projected endpoint in every plane, exchanging their
/// partners costs the same, so among such equal-cost exchanges keep those
/// that lower the number of close pairs.
fn break_ties(inst: &Instance, cost: &[Vec<f64>], sigma: &mut [usize]) {
    let m = sigma.len();
    let bound = inst.ell as f64 / (2f64.sqrt() * inst.spread as f64);
    let mut current = violations(inst, sigma, bound);
    while current > 0 {
        let mut improved = false;
        for a in 0..m {
            for b in a + 1..m {
                if !too_close(inst, sigma, a, b, bound) {
                    continue;
                }
                let now = cost[a][sigma[a]] + cost[b][sigma[b]];
                let swapped = cost[a][sigma[b]] + cost[b][sigma[a]];
                if swapped > now + 1e-9 * now.max(1.0) {
                    continue;
                }
                sigma.swap(a, b);
                let after = violations(inst, sigma, bound);
                if after < current {
                    current = after;
                    improved = true;
                } else {
                    sigma.swap(a, b);
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Same hypotheses, but only a local minimum under exchanging the partners
/// of two points. The uncrossing argument needs nothing more.
pub fn two_swap_matching(
    s1: &PointSet,
    s2: &PointSet,
    axis: usize,
    ell: i64,
    spread: i64,
) -> Result<SeparatedMatching, CombinatoricsError> {
    let inst = check_hypotheses(s1, s2, axis, ell, spread)?;
    let cost = cost_matrix(&inst);
    let m = cost.len();
    let mut sigma: Vec<usize> = (0..m).collect();
    loop {
        let mut improved = false;
        for a in 0..m {
            for b in a + 1..m {
                let now = cost[a][sigma[a]] + cost[b][sigma[b]];
                let swapped = cost[a][sigma[b]] + cost[b][sigma[a]];
                if swapped < now - 1e-12 * now.max(1.0) {
                    sigma.swap(a, b);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let total = sigma.iter().enumerate().map(|(a, &b)| cost[a][b]).sum();
    Ok(finish(&inst, sigma, total))
}
