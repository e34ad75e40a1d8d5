//! Monte Carlo estimators: the time constant, event probabilities and
//! their decay rates, the grid surrogate of the upper-tail rate function,
//! and property diagnostics of an estimated rate surface.
//!
//! Every estimator draws replicate `r` from `sample_configuration(box, p,
//! seed ^ r)`, so all events at one `n` see the same configurations and
//! results do not depend on the worker count.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cutpoints::{self, CutpointError, EventOutcome, EventSpec, UpperTail};
use crate::harness::parallel::{replicate_seed, run_parallel, ReplicateFailure, Tally};
use crate::lattice::{sample_configuration, BoxSpec, LatticeError};
use crate::metric::{self, MetricError};

/// Default ratio between box radius and `n`.
pub const DEFAULT_BOX_FACTOR: f64 = 4.0;

/// Default normal quantile for confidence intervals (95%).
pub const DEFAULT_Z: f64 = 1.96;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Cutpoint(#[from] CutpointError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no feasible grid point: {0}")]
    EmptyFeasibleSet(String),
}

/// Percolation threshold used as the supercriticality check. Exact in the
/// plane; numerical estimates from the literature otherwise.
pub fn critical_proxy(dim: usize) -> f64 {
    match dim {
        2 => 0.5,
        3 => 0.248_812,
        4 => 0.160_131,
        5 => 0.118_172,
        _ => 0.094_202,
    }
}

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn check_common(dim: usize, p: f64, n_grid: &[u32], box_factor: f64) -> Result<(), EstimatorError> {
    if !(2..=6).contains(&dim) {
        return Err(EstimatorError::Parameter(format!("dimension {dim}")));
    }
    if !(p > critical_proxy(dim) && p < 1.0) {
        return Err(EstimatorError::Parameter(format!("p = {p} is not supercritical in d = {dim}")));
    }
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(EstimatorError::Parameter("n grid must be nonempty and positive".into()));
    }
    if !(box_factor.is_finite() && box_factor >= 1.0) {
        return Err(EstimatorError::Parameter(format!("box factor {box_factor} < 1")));
    }
    Ok(())
}

fn box_for(dim: usize, n: u32, box_factor: f64, scale: f64) -> Result<BoxSpec, EstimatorError> {
    let radius = (box_factor * n as f64 * scale.max(1.0)).ceil() as u32;
    Ok(BoxSpec::new(dim, radius.max(1))?)
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// Time constant

/// Parameters of [`estimate_mu`].
#[derive(Debug, Clone, PartialEq)]
pub struct MuParams {
    pub dim: usize,
    pub p: f64,
    pub x: Vec<f64>,
    pub n_grid: Vec<u32>,
    pub replicates: u64,
    pub seed: u64,
    pub box_factor: f64,
    pub workers: usize,
    pub z: f64,
}

impl MuParams {
    pub fn new(dim: usize, p: f64, x: Vec<f64>, n_grid: Vec<u32>, replicates: u64, seed: u64) -> Self {
        Self { dim, p, x, n_grid, replicates, seed, box_factor: DEFAULT_BOX_FACTOR, workers: 0, z: DEFAULT_Z }
    }
}

/// Integer tallies of `D(0, floor(nx))` over replicates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DistanceTally {
    pub connected: u64,
    pub disconnected: u64,
    /// Replicates where the box truncation hides the answer.
    pub unknown: u64,
    pub sum: u64,
    pub sum_sq: u128,
    pub min: Option<u32>,
    pub max: Option<u32>,
}

impl DistanceTally {
    fn single(d: metric::Distance) -> Self {
        match (d.contaminated, d.value) {
            (true, _) => Self { unknown: 1, ..Self::default() },
            (false, None) => Self { disconnected: 1, ..Self::default() },
            (false, Some(v)) => Self {
                connected: 1,
                sum: v as u64,
                sum_sq: (v as u128) * (v as u128),
                min: Some(v),
                max: Some(v),
                ..Self::default()
            },
        }
    }
}

impl Tally for DistanceTally {
    fn merge(&mut self, o: &Self) {
        self.connected += o.connected;
        self.disconnected += o.disconnected;
        self.unknown += o.unknown;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.min = match (self.min, o.min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max = self.max.max(o.max);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuPoint {
    pub n: u32,
    pub radius: u32,
    pub tally: DistanceTally,
    /// `||floor(nx)||_1 / n`, a hard lower bound on every ratio.
    pub l1_floor: f64,
    /// Mean of `D / n` over connected replicates.
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// Least `D / n` over connected replicates.
    pub min_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuEstimate {
    pub x: Vec<f64>,
    pub points: Vec<MuPoint>,
    /// Mean at the largest `n` with at least one connected replicate.
    pub mu_hat: Option<f64>,
    pub mu_hat_n: Option<u32>,
    /// Grid values with no connected replicate.
    pub dropped: Vec<u32>,
    /// Means never increase by more than three combined standard errors
    /// from one grid value to the next.
    pub trend_ok: bool,
    pub partial: Option<ReplicateFailure>,
}

fn mu_point(n: u32, radius: u32, target: &[i64], tally: DistanceTally, z: f64) -> MuPoint {
    let nf = n as f64;
    let l1_floor = target.iter().map(|v| v.abs()).sum::<i64>() as f64 / nf;
    let (mean, std_err) = if tally.connected == 0 {
        (None, None)
    } else {
        let c = tally.connected as f64;
        let m = tally.sum as f64 / c;
        let var = if tally.connected > 1 {
            ((tally.sum_sq as f64 - c * m * m) / (c - 1.0)).max(0.0)
        } else {
            0.0
        };
        (Some(m / nf), Some((var / c).sqrt() / nf))
    };
    MuPoint {
        n,
        radius,
        tally,
        l1_floor,
        mean,
        std_err,
        ci: mean.zip(std_err).map(|(m, s)| (m - z * s, m + z * s)),
        min_ratio: tally.min.map(|v| v as f64 / nf),
    }
}

/// Conditional mean of `D(0, floor(nx)) / n` given `0 <-> floor(nx)`, for
/// each `n` of the grid.
pub fn estimate_mu(params: &MuParams) -> Result<MuEstimate, EstimatorError> {
    check_common(params.dim, params.p, &params.n_grid, params.box_factor)?;
    if params.x.len() != params.dim || params.x.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::Parameter("direction has the wrong length".into()));
    }
    let mut points = Vec::new();
    let mut partial = None;
    for &n in &params.n_grid {
        let spec = box_for(params.dim, n, params.box_factor, sup_norm(&params.x))?;
        let target: Vec<i64> = params.x.iter().map(|v| (v * n as f64).floor() as i64).collect();
        let zero = vec![0i64; params.dim];
        let (o, t) = (spec.index_of(&zero).expect("origin"), spec.index_of(&target).expect("box covers nx"));
        let run = run_parallel(params.replicates, params.workers, |r| {
            let sample = sample_configuration(&spec, params.p, replicate_seed(params.seed, r)).map_err(|e| e.to_string())?;
            metric::chemical_distance(&sample, o, t).map(DistanceTally::single).map_err(|e| e.to_string())
        });
        points.push(mu_point(n, spec.radius(), &target, run.merged(|t| *t), params.z));
        if run.failure.is_some() {
            partial = run.failure;
            break;
        }
    }
    let dropped = points.iter().filter(|p| p.mean.is_none()).map(|p| p.n).collect();
    let best = points.iter().filter(|p| p.mean.is_some()).max_by_key(|p| p.n);
    let informative: Vec<&MuPoint> = points.iter().filter(|p| p.mean.is_some()).collect();
    let trend_ok = informative.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        let slack = 3.0 * (a.std_err.unwrap().powi(2) + b.std_err.unwrap().powi(2)).sqrt();
        b.mean.unwrap() <= a.mean.unwrap() + slack
    });
    Ok(MuEstimate {
        x: params.x.clone(),
        mu_hat: best.and_then(|p| p.mean),
        mu_hat_n: best.map(|p| p.n),
        dropped,
        trend_ok,
        points,
        partial,
    })
}

// ---------------------------------------------------------------------------
// Event rates

/// Which event a rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A cut-point at time `t >= sn` near `nx`.
    CutPoint,
    /// The free-line refinement of the cut-point event.
    FreeCutPoint,
    /// `mu (1 + xi) n < D(0, nx) < inf`.
    UpperTail,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::CutPoint => "cutpoint",
            EventKind::FreeCutPoint => "free-cutpoint",
            EventKind::UpperTail => "upper-tail",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cutpoint" => Ok(EventKind::CutPoint),
            "free-cutpoint" => Ok(EventKind::FreeCutPoint),
            "upper-tail" => Ok(EventKind::UpperTail),
            other => Err(EstimatorError::Parameter(format!("unknown event kind {other:?}"))),
        }
    }
}

/// Hits, misses and undecidable replicates of one event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventTally {
    pub hits: u64,
    pub misses: u64,
    pub unknown: u64,
}

impl EventTally {
    pub fn total(&self) -> u64 {
        self.hits + self.misses + self.unknown
    }

    fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Hit => self.hits += 1,
            Outcome::Miss => self.misses += 1,
            Outcome::Unknown => self.unknown += 1,
        }
    }
}

impl Tally for EventTally {
    fn merge(&mut self, o: &Self) {
        self.hits += o.hits;
        self.misses += o.misses;
        self.unknown += o.unknown;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit,
    Miss,
    Unknown,
}

impl<W> From<&EventOutcome<W>> for Outcome {
    fn from(o: &EventOutcome<W>) -> Self {
        match o {
            EventOutcome::Hit(_) => Outcome::Hit,
            EventOutcome::Miss => Outcome::Miss,
            EventOutcome::Unknowable => Outcome::Unknown,
        }
    }
}

impl From<UpperTail> for Outcome {
    fn from(o: UpperTail) -> Self {
        match o {
            UpperTail::Hit => Outcome::Hit,
            UpperTail::Miss | UpperTail::Disconnected => Outcome::Miss,
            UpperTail::Unknowable => Outcome::Unknown,
        }
    }
}

/// One `(s, x)` point of an event family.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPoint {
    pub s: f64,
    pub x: Vec<f64>,
}

impl EventPoint {
    pub fn new(s: f64, x: Vec<f64>) -> Self {
        Self { s, x }
    }
}

/// Parameters of [`estimate_event_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    pub dim: usize,
    pub p: f64,
    pub kind: EventKind,
    /// Event points; the upper tail ignores `s`.
    pub points: Vec<EventPoint>,
    pub xi: f64,
    /// Time-constant estimate for the upper-tail threshold.
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub n_grid: Vec<u32>,
    pub replicates: u64,
    pub seed: u64,
    pub box_factor: f64,
    pub workers: usize,
    pub z: f64,
}

impl RateParams {
    pub fn new(
        dim: usize,
        p: f64,
        kind: EventKind,
        points: Vec<EventPoint>,
        n_grid: Vec<u32>,
        replicates: u64,
        seed: u64,
    ) -> Self {
        Self {
            dim,
            p,
            kind,
            points,
            xi: 0.0,
            mu: None,
            alpha: None,
            n_grid,
            replicates,
            seed,
            box_factor: DEFAULT_BOX_FACTOR,
            workers: 0,
            z: DEFAULT_Z,
        }
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        check_common(self.dim, self.p, &self.n_grid, self.box_factor)?;
        if self.points.is_empty() {
            return Err(EstimatorError::Parameter("no event points".into()));
        }
        for pt in &self.points {
            if pt.x.len() != self.dim || pt.x.iter().any(|v| !v.is_finite()) {
                return Err(EstimatorError::Parameter("event point has the wrong length".into()));
            }
            if !(pt.s.is_finite() && pt.s >= 0.0) {
                return Err(EstimatorError::Parameter(format!("s = {}", pt.s)));
            }
        }
        if self.kind == EventKind::UpperTail {
            match self.mu {
                Some(mu) if mu.is_finite() && mu > 0.0 => {}
                _ => return Err(EstimatorError::Parameter("upper tail needs a positive mu".into())),
            }
            if !(self.xi.is_finite() && self.xi >= 0.0) {
                return Err(EstimatorError::Parameter(format!("xi = {}", self.xi)));
            }
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(EstimatorError::Parameter(format!("alpha = {a}")));
            }
        }
        Ok(())
    }

    fn box_scale(&self) -> f64 {
        self.points.iter().map(|pt| pt.s.max(sup_norm(&pt.x))).fold(1.0, f64::max)
    }

    fn event_spec(&self, pt: &EventPoint, n: u32) -> EventSpec {
        let mut spec = EventSpec::new(pt.s, pt.x.clone(), n);
        if let Some(a) = self.alpha {
            spec.alpha = a;
        }
        spec
    }
}

/// Empirical probability and decay rate of one event at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub kind: EventKind,
    pub point: EventPoint,
    pub n: u32,
    pub radius: u32,
    pub tally: EventTally,
    /// `hits / (hits + misses)`.
    pub p_hat: Option<f64>,
    pub p_ci: (f64, f64),
    /// `-log(p_hat) / n`, when there is at least one hit.
    pub rate: Option<f64>,
    /// Delta-method standard error of the rate.
    pub rate_sigma: Option<f64>,
    /// Rate interval from the Wilson interval; the upper end is infinite
    /// when the lower Wilson end is zero.
    pub rate_ci: (f64, f64),
}

impl RateEstimate {
    fn from_tally(kind: EventKind, point: EventPoint, n: u32, radius: u32, tally: EventTally, z: f64) -> Self {
        let decided = tally.hits + tally.misses;
        let p_hat = (decided > 0).then(|| tally.hits as f64 / decided as f64);
        let (lo, hi) = wilson(tally.hits, decided, z);
        let nf = n as f64;
        let rate = p_hat.filter(|&p| p > 0.0).map(|p| (-p.ln() / nf).max(0.0));
        let rate_sigma = p_hat.filter(|&p| p > 0.0).map(|p| ((1.0 - p) / (p * decided as f64)).sqrt() / nf);
        let to_rate = |q: f64| if q > 0.0 { (-q.ln() / nf).max(0.0) } else { f64::INFINITY };
        RateEstimate { kind, point, n, radius, tally, p_hat, p_ci: (lo, hi), rate, rate_sigma, rate_ci: (to_rate(hi), to_rate(lo)) }
    }
}

/// Defect `-log P(n+m) - (-log P(n) - log P(m))` for one event point.
#[derive(Debug, Clone, PartialEq)]
pub struct SubadditivityDefect {
    pub point: EventPoint,
    pub n: u32,
    pub m: u32,
    pub defect: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub estimates: Vec<RateEstimate>,
    pub subadditivity: Vec<SubadditivityDefect>,
    pub partial: Option<ReplicateFailure>,
}

impl RateReport {
    pub fn at(&self, n: u32, point: &EventPoint) -> Option<&RateEstimate> {
        self.estimates.iter().find(|e| e.n == n && &e.point == point)
    }
}

fn evaluate_replicate(
    params: &RateParams,
    spec: &BoxSpec,
    n: u32,
    seed: u64,
) -> Result<Vec<Outcome>, String> {
    let sample = sample_configuration(spec, params.p, seed).map_err(|e| e.to_string())?;
    match params.kind {
        EventKind::CutPoint | EventKind::FreeCutPoint => {
            let (ball, cap) = cutpoints::origin_ball(&sample, None).map_err(|e| e.to_string())?;
            Ok(params
                .points
                .iter()
                .map(|pt| {
                    let ev = params.event_spec(pt, n);
                    if params.kind == EventKind::CutPoint {
                        Outcome::from(&cutpoints::event_a_on_ball(&sample, &ball, cap, &ev))
                    } else {
                        Outcome::from(&cutpoints::event_a_free_on_ball(&sample, &ball, cap, &ev))
                    }
                })
                .collect())
        }
        EventKind::UpperTail => {
            let mu = params.mu.expect("validated");
            params
                .points
                .iter()
                .map(|pt| {
                    cutpoints::upper_tail_event(&sample, n, &pt.x, params.xi, mu)
                        .map(|(o, _)| Outcome::from(o))
                        .map_err(|e| e.to_string())
                })
                .collect()
        }
    }
}

/// Tallies every event point at every `n`, with shared configurations
/// across points, and reports probabilities, rates and the approximate
/// subadditivity defect for `n, m, n + m` all on the grid.
pub fn estimate_event_rate(params: &RateParams) -> Result<RateReport, EstimatorError> {
    params.validate()?;
    let mut estimates = Vec::new();
    let mut partial = None;
    for &n in &params.n_grid {
        let spec = box_for(params.dim, n, params.box_factor, params.box_scale())?;
        let run = run_parallel(params.replicates, params.workers, |r| {
            evaluate_replicate(params, &spec, n, replicate_seed(params.seed, r))
        });
        let mut tallies = vec![EventTally::default(); params.points.len()];
        for outcomes in &run.results {
            for (t, &o) in tallies.iter_mut().zip(outcomes) {
                t.record(o);
            }
        }
        for (pt, tally) in params.points.iter().zip(tallies) {
            estimates.push(RateEstimate::from_tally(params.kind, pt.clone(), n, spec.radius(), tally, params.z));
        }
        if run.failure.is_some() {
            partial = run.failure;
            break;
        }
    }
    let subadditivity = subadditivity_defects(&estimates);
    Ok(RateReport { estimates, subadditivity, partial })
}

fn subadditivity_defects(estimates: &[RateEstimate]) -> Vec<SubadditivityDefect> {
    let log_p = |e: &RateEstimate| e.rate.map(|r| (r * e.n as f64, e.rate_sigma.unwrap() * e.n as f64));
    let mut out = Vec::new();
    for a in estimates {
        for b in estimates {
            if a.point != b.point || a.n > b.n {
                continue;
            }
            let Some(c) = estimates.iter().find(|c| c.point == a.point && c.n == a.n + b.n) else { continue };
            if let (Some((la, sa)), Some((lb, sb)), Some((lc, sc))) = (log_p(a), log_p(b), log_p(c)) {
                out.push(SubadditivityDefect {
                    point: a.point.clone(),
                    n: a.n,
                    m: b.n,
                    defect: lc - la - lb,
                    sigma: (sa * sa + sb * sb + sc * sc).sqrt(),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Rate surface diagnostics

/// One point of an estimated rate surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub rate: Option<f64>,
    pub sigma: f64,
}

/// Rates on a finite `(s, x)` grid at one `n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateSurface {
    pub points: Vec<SurfacePoint>,
}

const GRID_TOL: f64 = 1e-9;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= GRID_TOL * a.abs().max(b.abs()).max(1.0)
}

impl RateSurface {
    /// Surface of the estimates at a single `n`.
    pub fn from_estimates(estimates: &[RateEstimate], n: u32) -> Self {
        let points = estimates
            .iter()
            .filter(|e| e.n == n)
            .map(|e| SurfacePoint { s: e.point.s, x: e.point.x.clone(), rate: e.rate, sigma: e.rate_sigma.unwrap_or(0.0) })
            .collect();
        Self { points }
    }

    pub fn from_fn(grid: &[(f64, Vec<f64>)], f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let points = grid.iter().map(|(s, x)| SurfacePoint { s: *s, x: x.clone(), rate: Some(f(*s, x)), sigma: 0.0 }).collect();
        Self { points }
    }

    pub fn find(&self, s: f64, x: &[f64]) -> Option<&SurfacePoint> {
        self.points.iter().find(|p| same(p.s, s) && p.x.len() == x.len() && p.x.iter().zip(x).all(|(a, b)| same(*a, *b)))
    }
}

/// Verdict of one inequality check on a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleCheck {
    pub property: &'static str,
    /// Indices into the surface of the points involved.
    pub points: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateDiagnostics {
    pub checks: Vec<TripleCheck>,
    /// Triples skipped because some rate is undefined (no hits).
    pub skipped: usize,
    pub note: &'static str,
}

/// Caveat attached to every diagnostics report.
pub const FINITE_N_NOTE: &str = "finite-n empirical proxies only; the exact limiting rate function is out of reach at this \
scale, so violations reflect finite-size effects and Monte Carlo error, not counterexamples";

impl RateDiagnostics {
    /// `(passed, evaluated)` for one property.
    pub fn summary(&self, property: &str) -> (usize, usize) {
        let of: Vec<&TripleCheck> = self.checks.iter().filter(|c| c.property == property).collect();
        (of.iter().filter(|c| c.pass).count(), of.len())
    }
}

/// Checks, within `sigmas` combined standard errors, midpoint convexity
/// `I(mid) <= (I(a) + I(b)) / 2`, homogeneity `I(2s, 2x) = 2 I(s, x)`, and
/// the centring bound `I(2s, 0) <= 2 I(s, x)`. Nothing is asserted; the
/// outcome is reported.
pub fn check_rate_properties(surface: &RateSurface, sigmas: f64) -> RateDiagnostics {
    let pts = &surface.points;
    let index_of = |s: f64, x: &[f64]| pts.iter().position(|p| same(p.s, s) && p.x.iter().zip(x).all(|(a, b)| same(*a, *b)));
    let mut checks = Vec::new();
    let mut skipped = 0;
    let mut push = |property: &'static str, idx: Vec<usize>, lhs_w: &[f64], rhs_w: &[f64]| {
        // lhs = sum lhs_w[k] I(idx[k]); rhs = sum rhs_w[k] I(idx[lhs_w.len() + k]).
        let rates: Option<Vec<f64>> = idx.iter().map(|&i| pts[i].rate).collect();
        let Some(rates) = rates else {
            skipped += 1;
            return;
        };
        let (l, r) = idx.split_at(lhs_w.len());
        let lhs: f64 = lhs_w.iter().zip(&rates[..l.len()]).map(|(w, v)| w * v).sum();
        let rhs: f64 = rhs_w.iter().zip(&rates[l.len()..]).map(|(w, v)| w * v).sum();
        let var: f64 = lhs_w
            .iter()
            .zip(l)
            .chain(rhs_w.iter().zip(r))
            .map(|(w, &i)| (w * pts[i].sigma).powi(2))
            .sum();
        let sigma = var.sqrt();
        let pass = if property == "homogeneity" {
            (lhs - rhs).abs() <= sigmas * sigma + GRID_TOL
        } else {
            lhs <= rhs + sigmas * sigma + GRID_TOL
        };
        checks.push(TripleCheck { property, points: idx, lhs, rhs, sigma, pass });
    };
    for a in 0..pts.len() {
        let zero = vec![0.0; pts[a].x.len()];
        if let Some(c) = index_of(2.0 * pts[a].s, &zero) {
            push("centring", vec![c, a], &[1.0], &[2.0]);
        }
        let doubled: Vec<f64> = pts[a].x.iter().map(|v| 2.0 * v).collect();
        if let Some(h) = index_of(2.0 * pts[a].s, &doubled) {
            if h != a {
                push("homogeneity", vec![h, a], &[1.0], &[2.0]);
            }
        }
        for b in a + 1..pts.len() {
            let mid_x: Vec<f64> = pts[a].x.iter().zip(&pts[b].x).map(|(u, v)| (u + v) / 2.0).collect();
            if let Some(m) = index_of((pts[a].s + pts[b].s) / 2.0, &mid_x) {
                if m != a && m != b {
                    push("convexity", vec![m, a, b], &[1.0], &[0.5, 0.5]);
                }
            }
        }
    }
    RateDiagnostics { checks, skipped, note: FINITE_N_NOTE }
}

// ---------------------------------------------------------------------------
// Upper-tail rate surrogate

/// Grid for [`estimate_j`]: `s` in `ds Z ∩ [0, R]`, `y` in
/// `(dy Z)^d ∩ [-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JGrid {
    pub ds: f64,
    pub dy: f64,
    /// `R`; when `None` it is taken from an upper bound on `J` divided by
    /// `I(1, 0)`.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JPoint {
    pub xi: f64,
    pub value: f64,
    pub argmin_s: f64,
    pub argmin_y: Vec<f64>,
    /// `s + mu(y - x) - (1 + xi) mu(x)` at the minimizer.
    pub slack: f64,
    pub radius: f64,
    pub feasible: usize,
}

/// Minimum of `rate` over the grid points satisfying
/// `s + mu(y - x) >= (1 + xi) mu(x)`. Points where `rate` is `None` are
/// skipped. `mu` should already be the pessimistic edge of its interval.
pub fn estimate_j(
    x: &[f64],
    xis: &[f64],
    mu: &dyn Fn(&[f64]) -> f64,
    rate: &dyn Fn(f64, &[f64]) -> Option<f64>,
    grid: JGrid,
) -> Result<Vec<JPoint>, EstimatorError> {
    if !(grid.ds > 0.0 && grid.dy > 0.0) {
        return Err(EstimatorError::Parameter("grid spacings must be positive".into()));
    }
    if xis.iter().any(|xi| !(xi.is_finite() && *xi >= 0.0)) {
        return Err(EstimatorError::Parameter("xi must be finite and nonnegative".into()));
    }
    let d = x.len();
    let mu_x = mu(x);
    let radius = match grid.radius {
        Some(r) => r,
        None => {
            // (ceil(xi mu(x)), 0) is feasible for the largest xi.
            let xi_max = xis.iter().copied().fold(0.0, f64::max);
            let s_up = (xi_max * mu_x / grid.ds - GRID_TOL).ceil().max(0.0) * grid.ds;
            let upper = rate(s_up, &vec![0.0; d])
                .ok_or_else(|| EstimatorError::Parameter(format!("rate unknown at ({s_up}, 0)")))?;
            let unit = rate(1.0, &vec![0.0; d])
                .filter(|&u| u > 0.0)
                .ok_or_else(|| EstimatorError::Parameter("I(1, 0) must be known and positive".into()))?;
            (upper / unit).max(s_up)
        }
    };
    let ks = (radius / grid.ds + GRID_TOL).floor() as i64;
    let ky = (radius / grid.dy + GRID_TOL).floor() as i64;
    // (s, y, I(s, y)) for every grid point with a known rate.
    let mut candidates: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let ys = crate::geometry::Rect::cube(&vec![0; d], ky);
    for si in 0..=ks {
        let s = si as f64 * grid.ds;
        for yi in ys.points() {
            let y: Vec<f64> = yi.iter().map(|&v| v as f64 * grid.dy).collect();
            if let Some(v) = rate(s, &y) {
                candidates.push((s, y, v));
            }
        }
    }
    xis.iter()
        .map(|&xi| {
            let need = (1.0 + xi) * mu_x;
            let mut best = None::<(&(f64, Vec<f64>, f64), f64)>;
            let mut feasible = 0;
            for c in &candidates {
                let diff: Vec<f64> = c.1.iter().zip(x).map(|(a, b)| a - b).collect();
                let slack = c.0 + mu(&diff) - need;
                if slack < -GRID_TOL * need.max(1.0) {
                    continue;
                }
                feasible += 1;
                if best.is_none_or(|(b, _)| c.2 < b.2) {
                    best = Some((c, slack));
                }
            }
            let (c, slack) = best.ok_or_else(|| {
                EstimatorError::EmptyFeasibleSet(format!("xi = {xi}, radius {radius}, {} candidates", candidates.len()))
            })?;
            Ok(JPoint { xi, value: c.2, argmin_s: c.0, argmin_y: c.1.clone(), slack, radius, feasible })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Upper tail against late cut-points

#[derive(Debug, Clone, PartialEq)]
pub struct UpperTailParams {
    pub dim: usize,
    pub p: f64,
    pub x: Vec<f64>,
    pub xi: f64,
    pub mu: f64,
    /// Cut-points count from time `s n` on, near the origin.
    pub s: f64,
    pub n_grid: Vec<u32>,
    pub replicates: u64,
    pub seed: u64,
    pub box_factor: f64,
    pub workers: usize,
    pub z: f64,
}

/// Joint tallies of the upper-tail event and a late cut-point near the
/// origin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JointTally {
    pub both: u64,
    pub tail_only: u64,
    pub cut_only: u64,
    pub neither: u64,
    pub unknown: u64,
}

impl Tally for JointTally {
    fn merge(&mut self, o: &Self) {
        self.both += o.both;
        self.tail_only += o.tail_only;
        self.cut_only += o.cut_only;
        self.neither += o.neither;
        self.unknown += o.unknown;
    }
}

impl JointTally {
    /// Frequency of a late cut-point given the upper tail, with its Wilson
    /// interval.
    pub fn cut_given_tail(&self, z: f64) -> Option<(f64, (f64, f64))> {
        let t = self.both + self.tail_only;
        (t > 0).then(|| (self.both as f64 / t as f64, wilson(self.both, t, z)))
    }

    pub fn tail_given_cut(&self, z: f64) -> Option<(f64, (f64, f64))> {
        let t = self.both + self.cut_only;
        (t > 0).then(|| (self.both as f64 / t as f64, wilson(self.both, t, z)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    pub n: u32,
    pub radius: u32,
    pub tally: JointTally,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointReport {
    pub points: Vec<JointPoint>,
    pub partial: Option<ReplicateFailure>,
}

/// Classifies one configuration: upper tail for `floor(nx)` and a
/// cut-point at time `>= sn` within `n^alpha` of the origin.
pub fn joint_outcome(
    sample: &crate::lattice::PercolationSample,
    n: u32,
    x: &[f64],
    xi: f64,
    mu: f64,
    s: f64,
) -> Result<JointTally, EstimatorError> {
    let (tail, _) = cutpoints::upper_tail_event(sample, n, x, xi, mu)?;
    let spec = EventSpec::new(s, vec![0.0; x.len()], n);
    let cut = cutpoints::event_a(sample, &spec)?;
    let mut t = JointTally::default();
    match (Outcome::from(tail), Outcome::from(&cut)) {
        (Outcome::Unknown, _) | (_, Outcome::Unknown) => t.unknown = 1,
        (Outcome::Hit, Outcome::Hit) => t.both = 1,
        (Outcome::Hit, _) => t.tail_only = 1,
        (_, Outcome::Hit) => t.cut_only = 1,
        _ => t.neither = 1,
    }
    Ok(t)
}

pub fn upper_tail_vs_cutpoint(params: &UpperTailParams) -> Result<JointReport, EstimatorError> {
    check_common(params.dim, params.p, &params.n_grid, params.box_factor)?;
    if params.x.len() != params.dim {
        return Err(EstimatorError::Parameter("direction has the wrong length".into()));
    }
    if !(params.mu > 0.0 && params.xi >= 0.0 && params.s >= 0.0) {
        return Err(EstimatorError::Parameter("need mu > 0, xi >= 0, s >= 0".into()));
    }
    let mut points = Vec::new();
    let mut partial = None;
    for &n in &params.n_grid {
        let spec = box_for(params.dim, n, params.box_factor, sup_norm(&params.x).max(params.s))?;
        let run = run_parallel(params.replicates, params.workers, |r| {
            let sample = sample_configuration(&spec, params.p, replicate_seed(params.seed, r)).map_err(|e| e.to_string())?;
            joint_outcome(&sample, n, &params.x, params.xi, params.mu, params.s).map_err(|e| e.to_string())
        });
        points.push(JointPoint { n, radius: spec.radius(), tally: run.merged(|t| *t) });
        if run.failure.is_some() {
            partial = run.failure;
            break;
        }
    }
    Ok(JointReport { points, partial })
}

// ---------------------------------------------------------------------------
// Box-to-box against point-to-point upper tails

/// Parameters of [`slab_pairs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlabPairParams {
    pub dim: usize,
    pub p: f64,
    pub slab: crate::renorm::SlabParams,
    pub replicates: u64,
    pub seed: u64,
    /// Extra room around the slab sources and the two endpoints.
    pub margin: u32,
    pub workers: usize,
}

/// One paired replicate: the slab record and the point-to-point upper
/// tail for `0` and `n e_1`, on the same configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabPair {
    pub record: crate::renorm::SlabRecord,
    pub point: UpperTail,
    pub point_distance: Option<u32>,
}

/// Box centred at `(n/2) e_1` that holds the slab sources, their
/// translates by `n e_1`, and `margin` more in every direction.
pub fn slab_box(params: &SlabPairParams) -> Result<BoxSpec, EstimatorError> {
    let s = &params.slab;
    let lattice = crate::renorm::MacroLattice::new(params.dim, s.big_n, s.mu_e1);
    let e = crate::num::floor_tol(s.epsilon * s.n as f64) as i64;
    let half = (s.n as i64 + 1) / 2;
    let reach = (half + e).max(lattice.rho * lattice.n) + params.margin as i64;
    let mut offset = vec![0i64; params.dim];
    offset[0] = s.n as i64 / 2;
    Ok(BoxSpec::with_offset(params.dim, reach as u32, offset)?)
}

pub fn slab_pairs(params: &SlabPairParams) -> Result<(Vec<SlabPair>, Option<ReplicateFailure>), EstimatorError> {
    check_common(params.dim, params.p, &[params.slab.n], 1.0)?;
    if params.dim < 3 {
        return Err(EstimatorError::Parameter("slabs need d >= 3".into()));
    }
    let spec = slab_box(params)?;
    let mut e1 = vec![0.0; params.dim];
    e1[0] = 1.0;
    let run = run_parallel(params.replicates, params.workers, |r| {
        let sample = sample_configuration(&spec, params.p, replicate_seed(params.seed, r)).map_err(|e| e.to_string())?;
        let record = crate::renorm::slab_experiment(&sample, &params.slab).map_err(|e| e.to_string())?;
        let (point, point_distance) =
            cutpoints::upper_tail_event(&sample, params.slab.n, &e1, params.slab.xi, params.slab.mu_e1).map_err(|e| e.to_string())?;
        Ok(SlabPair { record, point, point_distance })
    });
    Ok((run.results, run.failure))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairVerdict {
    /// The box-to-box frequency is below the point-to-point one by more
    /// than three standard errors of the paired difference.
    BoxBelowPoint,
    /// The difference is within three standard errors.
    Indistinguishable,
    BoxAbovePoint,
}

impl PairVerdict {
    pub fn describe(self) -> &'static str {
        match self {
            PairVerdict::BoxBelowPoint => "box-to-box below point-to-point (3 sigma)",
            PairVerdict::Indistinguishable => "indistinguishable at this scale",
            PairVerdict::BoxAbovePoint => "box-to-box above point-to-point (3 sigma)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedFrequencies {
    /// Replicates where both events are decided.
    pub decided: u64,
    pub box_hits: u64,
    pub point_hits: u64,
    pub box_freq: f64,
    pub point_freq: f64,
    /// Standard error of the mean paired difference.
    pub sigma: f64,
    pub verdict: PairVerdict,
}

/// Paired comparison of the box-to-box and point-to-point upper-tail
/// indicators over decided replicates.
pub fn paired_frequencies(pairs: &[SlabPair]) -> PairedFrequencies {
    let decided: Vec<(bool, bool)> = pairs
        .iter()
        .filter(|p| !p.record.box_contaminated && p.point != UpperTail::Unknowable)
        .map(|p| (p.record.box_event, p.point == UpperTail::Hit))
        .collect();
    let n = decided.len() as u64;
    let box_hits = decided.iter().filter(|d| d.0).count() as u64;
    let point_hits = decided.iter().filter(|d| d.1).count() as u64;
    let (box_freq, point_freq, sigma) = if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let nf = n as f64;
        let diffs: Vec<f64> = decided.iter().map(|&(b, p)| p as i32 as f64 - b as i32 as f64).collect();
        let mean = diffs.iter().sum::<f64>() / nf;
        let var = if n > 1 { diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
        (box_hits as f64 / nf, point_hits as f64 / nf, (var / nf).sqrt())
    };
    let diff = point_freq - box_freq;
    let verdict = if diff > 3.0 * sigma && diff > 0.0 {
        PairVerdict::BoxBelowPoint
    } else if diff < -3.0 * sigma && diff < 0.0 {
        PairVerdict::BoxAbovePoint
    } else {
        PairVerdict::Indistinguishable
    };
    PairedFrequencies { decided: n, box_hits, point_hits, box_freq, point_freq, sigma, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson(30, 100, DEFAULT_Z);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson(0, 0, DEFAULT_Z), (0.0, 1.0));
        let (lo, hi) = wilson(0, 50, DEFAULT_Z);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn trivial_event_has_zero_rate() {
        let params = RateParams::new(2, 0.7, EventKind::CutPoint, vec![EventPoint::new(0.0, vec![0.0, 0.0])], vec![4, 6], 50, 3);
        let report = estimate_event_rate(&params).unwrap();
        for e in &report.estimates {
            assert_eq!(e.tally.hits, 50);
            assert_eq!(e.rate, Some(0.0));
        }
    }

    #[test]
    fn mu_never_beats_l1() {
        let params = MuParams::new(2, 0.6, vec![1.0, 0.0], vec![5, 10], 40, 11);
        let est = estimate_mu(&params).unwrap();
        for p in &est.points {
            if let Some(m) = p.min_ratio {
                assert!(m >= p.l1_floor);
            }
        }
        assert!(est.mu_hat.unwrap() >= 1.0);
    }

    #[test]
    fn subcritical_is_rejected() {
        let params = MuParams::new(2, 0.5, vec![1.0, 0.0], vec![5], 1, 0);
        assert!(estimate_mu(&params).is_err());
    }

    #[test]
    fn exact_homogeneous_surface_has_no_violations() {
        let mut grid = Vec::new();
        for s in [0.0, 0.5, 1.0, 1.5, 2.0] {
            for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                grid.push((s, vec![x, 0.0]));
            }
        }
        let surface = RateSurface::from_fn(&grid, |s, x| s + x[0].abs());
        let diag = check_rate_properties(&surface, 3.0);
        assert!(!diag.checks.is_empty());
        assert!(diag.checks.iter().all(|c| c.pass));
        assert!(diag.note.contains("out of reach"));
    }

    #[test]
    fn j_at_zero_and_monotone() {
        let l1 = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>();
        let rate = |s: f64, y: &[f64]| Some(s + l1(y));
        let grid = JGrid { ds: 0.25, dy: 0.25, radius: Some(3.0) };
        let xis = [0.0, 0.25, 0.5, 1.0];
        let js = estimate_j(&[1.0, 0.0], &xis, &l1, &rate, grid).unwrap();
        assert_eq!(js[0].value, 0.0);
        assert!(js.windows(2).all(|w| w[0].value <= w[1].value));
        assert!((js[2].value - 0.5).abs() < 1e-12);
    }
}
