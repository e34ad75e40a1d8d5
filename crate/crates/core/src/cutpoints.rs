//! Space-time cut-points of the ball around the origin, the free-line
//! refinement, line counts, and edge surgery that creates cut-points.
//!
//! A cut-point is a pair `(t, w)` with `B_t \ B_{t-1} = {w}`. Events are
//! evaluated up to a time cap `T`: the event `A_{s,x}(n)` is read as "some
//! `t` in `[sn, T]` is a cut-point time with location in the window". By
//! default `T` is the `l_inf` distance from the origin to the nearest face,
//! so that every layer inspected is exact and the answer never depends on the
//! box truncation.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::lattice::{LatticeError, PercolationSample};
use crate::metric::{self, BallGrowth, MetricError};
use crate::num::{ceil_sqrt, ceil_tol, floor_pow, floor_tol, isqrt};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutpointError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("ball met the box face at time {touch} before its last layer {last}")]
    Contaminated { touch: u32, last: u32 },
    #[error("origin is not inside the box")]
    OriginOutside,
    #[error("spatial rate has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("vertex {vertex} is not in layer {time}")]
    NotInLayer { vertex: usize, time: u32 },
    #[error("|B_t| = {size} exceeds the volume bound {bound}")]
    BallTooLarge { size: usize, bound: u64 },
    #[error("no layer in the search window has at most {0} vertices")]
    NoSparseLayer(u64),
    #[error("surgery plan has {size} edges, above the bound {bound}")]
    PlanTooLarge { size: usize, bound: f64 },
    #[error("edge {0} is both closed and opened by the plan")]
    Overlap(usize),
    #[error("invalid event parameter: {0}")]
    Parameter(String),
}

/// `(t, w)` with `B_t \ B_{t-1} = {w}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CutPointRecord {
    pub time: u32,
    pub location: usize,
}

/// Cut-point times `t >= t_min` of a ball, in increasing order. Layers after
/// the first face contact are unreliable, so such balls are rejected unless
/// the contact happens in the last grown layer.
pub fn detect_cutpoints(ball: &BallGrowth, t_min: u32) -> Result<Vec<CutPointRecord>, CutpointError> {
    if let Some(touch) = ball.touch_time() {
        if touch < ball.max_time() {
            return Err(CutpointError::Contaminated { touch, last: ball.max_time() });
        }
    }
    Ok((t_min..=ball.max_time())
        .filter_map(|t| match ball.layer(t) {
            [w] => Some(CutPointRecord { time: t, location: *w }),
            _ => None,
        })
        .collect())
}

/// Parameters `(s, x, n, alpha)` of a cut-point event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub s: f64,
    pub x: Vec<f64>,
    pub n: u32,
    pub alpha: f64,
    /// Largest time inspected; `None` means the origin's distance to the
    /// nearest face.
    pub time_cap: Option<u32>,
}

impl EventSpec {
    pub fn new(s: f64, x: Vec<f64>, n: u32) -> Self {
        let alpha = default_alpha(x.len());
        Self { s, x, n, alpha, time_cap: None }
    }

    fn validate(&self, dim: usize) -> Result<(), CutpointError> {
        if self.x.len() != dim {
            return Err(CutpointError::Dimension { expected: dim, got: self.x.len() });
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(CutpointError::Parameter(format!("s = {}", self.s)));
        }
        if self.n == 0 {
            return Err(CutpointError::Parameter("n = 0".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) || self.x.iter().any(|v| !v.is_finite()) {
            return Err(CutpointError::Parameter("non-finite rate".into()));
        }
        Ok(())
    }

    /// `floor(n^alpha)`.
    pub fn window_radius(&self) -> u64 {
        floor_pow(self.n as u64, self.alpha)
    }

    /// Least admissible cut-point time, `ceil(s n)`.
    pub fn min_time(&self) -> u32 {
        ceil_tol(self.s * self.n as f64).max(0.0) as u32
    }

    /// Whether `w` lies in `Lambda_{radius}(n x)`.
    pub fn in_window(&self, w: &[i64], radius: u64) -> bool {
        let n = self.n as f64;
        w.iter().zip(&self.x).all(|(&wi, &xi)| (wi as f64 - n * xi).abs() <= radius as f64 + 1e-9)
    }
}

/// `1 - 1/(6d)`.
pub fn default_alpha(dim: usize) -> f64 {
    1.0 - 1.0 / (6.0 * dim as f64)
}

/// Tri-state outcome of an event evaluated on a finite box.
#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome<W> {
    Hit(W),
    Miss,
    /// The box truncation hides whether the event occurs.
    Unknowable,
}

impl<W> EventOutcome<W> {
    pub fn is_hit(&self) -> bool {
        matches!(self, EventOutcome::Hit(_))
    }
}

/// Ball around the origin grown to the event cap, and the cap itself.
pub fn origin_ball(sample: &PercolationSample, cap: Option<u32>) -> Result<(BallGrowth, u32), CutpointError> {
    let spec = sample.spec();
    let zero = vec![0; spec.dim()];
    let origin = spec.index_of(&zero).ok_or(CutpointError::OriginOutside)?;
    let cap = cap.unwrap_or_else(|| spec.face_distance(&zero).expect("origin inside"));
    Ok((metric::grow_ball(sample, origin, Some(cap))?, cap))
}

/// Last time up to which layers of `ball` may be inspected for a cap, and
/// whether that range covers the whole cap.
fn inspect_range(ball: &BallGrowth, cap: u32) -> (u32, bool) {
    let exact = ball.exact_limit().unwrap_or(u32::MAX);
    let last = cap.min(exact).min(ball.max_time());
    let complete = (ball.exhausted() && ball.touch_time().is_none()) || exact >= cap;
    (last, complete)
}

/// `A_{s,x}(n)`: a cut-point at some time `t >= sn` located in
/// `Lambda_{n^alpha}(nx)`. The witness is the least such time.
pub fn event_a(sample: &PercolationSample, spec: &EventSpec) -> Result<EventOutcome<CutPointRecord>, CutpointError> {
    spec.validate(sample.spec().dim())?;
    let (ball, cap) = origin_ball(sample, spec.time_cap)?;
    Ok(event_a_on_ball(sample, &ball, cap, spec))
}

/// [`event_a`] on a ball already grown to at least `cap`, so that several
/// `(s, x)` can share one growth.
pub fn event_a_on_ball(
    sample: &PercolationSample,
    ball: &BallGrowth,
    cap: u32,
    spec: &EventSpec,
) -> EventOutcome<CutPointRecord> {
    let box_spec = sample.spec();
    let radius = spec.window_radius();
    let (last, complete) = inspect_range(ball, cap);
    let mut w = vec![0; box_spec.dim()];
    for t in spec.min_time()..=last {
        if let [v] = ball.layer(t) {
            box_spec.write_coords(*v, &mut w);
            if spec.in_window(&w, radius) {
                return EventOutcome::Hit(CutPointRecord { time: t, location: *v });
            }
        }
    }
    if complete {
        EventOutcome::Miss
    } else {
        EventOutcome::Unknowable
    }
}

/// Witness of the free-line event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeLineWitness {
    pub record: CutPointRecord,
    /// Axis of the free line through the cut-point.
    pub line_axis: usize,
    /// Axis of the hyperplane whose section of the ball meets few lines.
    pub plane_axis: usize,
}

/// `A^free_{s,x}(n)`: a cut-point `(t, w)` with `t >= sn - 3 n^alpha`,
/// `w` in `Lambda_{4 n^alpha}(nx)`, `|B_t| <= n^{7/4}`, and axes `i != j`
/// such that the line through `w` along `e_i` meets `B_t` only at `w` and
/// `N_k(H_j(w) ∩ B_t) <= n^alpha` for every `k != j`. The least `t` wins,
/// then the least `(i, j)`.
pub fn event_a_free(sample: &PercolationSample, spec: &EventSpec) -> Result<EventOutcome<FreeLineWitness>, CutpointError> {
    spec.validate(sample.spec().dim())?;
    let (ball, cap) = origin_ball(sample, spec.time_cap)?;
    Ok(event_a_free_on_ball(sample, &ball, cap, spec))
}

pub fn event_a_free_on_ball(
    sample: &PercolationSample,
    ball: &BallGrowth,
    cap: u32,
    spec: &EventSpec,
) -> EventOutcome<FreeLineWitness> {
    let box_spec = sample.spec();
    let d = box_spec.dim();
    let r = spec.window_radius();
    let volume = floor_pow(spec.n as u64, 1.75) as usize;
    let start = ceil_tol(spec.s * spec.n as f64 - 3.0 * r as f64).max(0.0) as u32;
    let (last, complete) = inspect_range(ball, cap);
    let mut w = vec![0; d];
    for t in start..=last {
        let [v] = ball.layer(t) else { continue };
        if ball.ball_size(t) > volume {
            // Ball sizes only grow, so no later time can qualify.
            break;
        }
        box_spec.write_coords(*v, &mut w);
        if !spec.in_window(&w, 4 * r) {
            continue;
        }
        let members: Vec<Vec<i64>> = ball.reached()[..ball.ball_size(t)].iter().map(|&u| box_spec.coords_of(u)).collect();
        let free: Vec<bool> = (0..d).map(|i| line_is_free(&members, &w, i)).collect();
        for j in 0..d {
            let section: Vec<Vec<i64>> = members.iter().filter(|z| z[j] == w[j]).cloned().collect();
            let sparse = (0..d).filter(|&k| k != j).all(|k| line_count(&section, k) as u64 <= r);
            if !sparse {
                continue;
            }
            if let Some(i) = (0..d).find(|&i| i != j && free[i]) {
                let record = CutPointRecord { time: t, location: *v };
                return EventOutcome::Hit(FreeLineWitness { record, line_axis: i, plane_axis: j });
            }
        }
    }
    if complete {
        EventOutcome::Miss
    } else {
        EventOutcome::Unknowable
    }
}

fn line_is_free(members: &[Vec<i64>], w: &[i64], axis: usize) -> bool {
    members
        .iter()
        .filter(|z| z.as_slice() != w)
        .all(|z| z.iter().zip(w).enumerate().any(|(a, (zi, wi))| a != axis && zi != wi))
}

/// `N_i(A)`: number of distinct lines parallel to `e_axis` meeting `A`.
pub fn line_count(points: &[Vec<i64>], axis: usize) -> usize {
    let mut keys: Vec<Vec<i64>> = points
        .iter()
        .map(|z| {
            let mut k = z.clone();
            k[axis] = 0;
            k
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Edges to force closed (`E_0`) and open (`E_1`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurgeryPlan {
    close: BTreeSet<usize>,
    open: BTreeSet<usize>,
}

impl SurgeryPlan {
    pub fn new(close: BTreeSet<usize>, open: BTreeSet<usize>) -> Result<Self, CutpointError> {
        if let Some(&e) = close.intersection(&open).next() {
            return Err(CutpointError::Overlap(e));
        }
        Ok(Self { close, open })
    }

    pub fn edges_to_close(&self) -> &BTreeSet<usize> {
        &self.close
    }

    pub fn edges_to_open(&self) -> &BTreeSet<usize> {
        &self.open
    }

    pub fn len(&self) -> usize {
        self.close.len() + self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty() && self.open.is_empty()
    }
}

/// New sample with the plan's edges closed and opened; all other edges keep
/// their state.
pub fn apply_surgery(sample: &PercolationSample, plan: &SurgeryPlan) -> Result<PercolationSample, CutpointError> {
    let close: Vec<usize> = plan.close.iter().copied().collect();
    let open: Vec<usize> = plan.open.iter().copied().collect();
    Ok(sample.with_edges(&close, &open)?)
}

/// Closing plan that turns `w` (at distance `t` from the ball's source) into
/// a cut-point at time `t`, given `|B_t| <= k`.
///
/// With `gamma` the lexicographic geodesic to `w`, the plan picks the largest
/// `r` in `[t - ceil(sqrt k) + 1, t]` with `|B_r \ B_{r-1}| <= floor(sqrt k)`
/// and closes every edge off `gamma` that touches `gamma` at distance `>= r`,
/// plus every edge off `gamma` between layer `r` and `B_{r-1}`. Afterwards
/// `gamma` is the only way out of `B_{r-1}` and has no side branches up to
/// `w`. At most `4d sqrt(k)` edges are closed.
pub fn force_cutpoint(
    sample: &PercolationSample,
    ball: &BallGrowth,
    t: u32,
    w: usize,
    k: u64,
) -> Result<SurgeryPlan, CutpointError> {
    let spec = sample.spec();
    let d = spec.dim();
    if ball.dist(w) != Some(t) {
        return Err(CutpointError::NotInLayer { vertex: w, time: t });
    }
    if t == 0 {
        return Ok(SurgeryPlan::default());
    }
    if let Some(touch) = ball.touch_time() {
        if touch < t {
            return Err(CutpointError::Contaminated { touch, last: t });
        }
    }
    let size = ball.ball_size(t);
    if size as u64 > k {
        return Err(CutpointError::BallTooLarge { size, bound: k });
    }
    let sparse = isqrt(k);
    let lowest = (t as i64 - ceil_sqrt(k) as i64 + 1).max(1) as u32;
    let r = (lowest..=t)
        .rev()
        .find(|&r| ball.layer(r).len() as u64 <= sparse)
        .ok_or(CutpointError::NoSparseLayer(sparse))?;
    let path = metric::geodesic(sample, ball, w)?;
    let path_edges: BTreeSet<usize> =
        path.windows(2).map(|p| spec.edge_between(p[0], p[1]).expect("adjacent")).collect();
    let strides = spec.strides();
    let mut close = BTreeSet::new();
    let incident = |v: usize, keep: &dyn Fn(usize) -> bool, close: &mut BTreeSet<usize>| {
        for a in 0..d {
            let c = spec.digit(v, a);
            if c + 1 < spec.side() && keep(v + strides[a]) {
                close.insert(spec.edge_from(v, a).expect("inside"));
            }
            if c > 0 && keep(v - strides[a]) {
                close.insert(spec.edge_from(v - strides[a], a).expect("inside"));
            }
        }
    };
    for &v in &path[r as usize..] {
        incident(v, &|_| true, &mut close);
    }
    let inner = |u: usize| ball.dist(u).is_some_and(|du| du < r);
    for &v in ball.layer(r) {
        incident(v, &inner, &mut close);
    }
    close.retain(|e| !path_edges.contains(e));
    let bound = 4.0 * d as f64 * (k as f64).sqrt();
    if close.len() as f64 > bound {
        return Err(CutpointError::PlanTooLarge { size: close.len(), bound });
    }
    SurgeryPlan::new(close, BTreeSet::new())
}

/// Outcome of the upper-tail event `mu (1 + xi) n < D(0, y) < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperTail {
    Hit,
    Miss,
    Disconnected,
    Unknowable,
}

/// Evaluates the upper-tail event for the target `y = floor(n x)`, with
/// `threshold_rate` the value multiplying `(1 + xi) n` (an estimate of
/// `mu(x)`). Box truncation is handled exactly: a finite in-box distance is
/// trusted when it does not exceed the first face-contact time, and is known
/// to exceed the threshold whenever that contact time already does.
pub fn upper_tail_event(
    sample: &PercolationSample,
    n: u32,
    x: &[f64],
    xi: f64,
    threshold_rate: f64,
) -> Result<(UpperTail, Option<u32>), CutpointError> {
    let spec = sample.spec();
    if x.len() != spec.dim() {
        return Err(CutpointError::Dimension { expected: spec.dim(), got: x.len() });
    }
    let zero = vec![0; spec.dim()];
    let origin = spec.index_of(&zero).ok_or(CutpointError::OriginOutside)?;
    let scaled: Vec<f64> = x.iter().map(|v| v * n as f64).collect();
    let target = metric::floor_point(spec, &scaled)?;
    let threshold = threshold_rate * (1.0 + xi) * n as f64;
    Ok(classify_upper_tail(sample, origin, target, threshold))
}

pub(crate) fn classify_upper_tail(
    sample: &PercolationSample,
    origin: usize,
    target: usize,
    threshold: f64,
) -> (UpperTail, Option<u32>) {
    let spec = sample.spec();
    let mut stop = bitvec::bitvec![0; spec.vertex_count()];
    stop.set(target, true);
    let ball = metric::grow_from(sample, &[origin], None, None, Some(&stop));
    let exceeds = |d: f64| d > floor_tol(threshold);
    match (ball.dist(target), ball.touch_time()) {
        (Some(d), None) => (if exceeds(d as f64) { UpperTail::Hit } else { UpperTail::Miss }, Some(d)),
        (Some(d), Some(tc)) if d <= tc => {
            (if exceeds(d as f64) { UpperTail::Hit } else { UpperTail::Miss }, Some(d))
        }
        (Some(d), Some(_)) => {
            if !exceeds(d as f64) {
                (UpperTail::Miss, None)
            } else if metric::exceeds_within_box(sample, &[origin], &[target], floor_tol(threshold).max(0.0) as u32)
                == Ok(Some(true))
            {
                (UpperTail::Hit, None)
            } else {
                (UpperTail::Unknowable, None)
            }
        }
        (None, None) => (UpperTail::Disconnected, None),
        (None, Some(_)) => {
            let back = metric::grow_from(sample, &[target], None, None, None);
            if back.touch_time().is_none() {
                (UpperTail::Disconnected, None)
            } else {
                (UpperTail::Unknowable, None)
            }
        }
    }
}
