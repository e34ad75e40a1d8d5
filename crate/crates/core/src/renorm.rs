//! Macroscopic lattice of side `N`: good/bad box classification, bad-site
//! clusters, routing through good boxes, and slab experiments.
//!
//! Site `i` owns the microscopic box `Λ_N(i) = [-N, N)^d + 2iN`; its enlarged
//! box `Λ'_N(i)` is the union over the `3^d` neighbouring sites, and
//! `Λ^ρ_N(i)` the union over sites within `l_inf` distance `ρ`.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Write};

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{self, Rect};
use crate::lattice::{BoxSpec, PercolationSample};
use crate::metric::{self, MetricError, Region, INF};
use crate::num::floor_tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("site {0:?} is not classified as good")]
    NotGood(Vec<i64>),
    #[error("sites {0:?} and {1:?} are not *-adjacent")]
    NotAdjacent(Vec<i64>, Vec<i64>),
    #[error("endpoint {0:?} is not in the dominant cluster of its box")]
    EndpointNotInCluster(Vec<i64>),
    #[error("no open route found between consecutive good boxes")]
    NoRoute,
    #[error("route of length {length} exceeds the bound {bound}")]
    RouteTooLong { length: usize, bound: f64 },
    #[error("experiment geometry does not fit in the sample box")]
    Geometry,
}

/// A norm on `Z^d`, typically an estimate of the time constant.
pub trait Norm: Sync {
    fn norm(&self, v: &[i64]) -> f64;
}

/// `c * ||v||_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledL1(pub f64);

impl Norm for ScaledL1 {
    fn norm(&self, v: &[i64]) -> f64 {
        self.0 * v.iter().map(|c| c.abs() as f64).sum::<f64>()
    }
}

impl<F: Fn(&[i64]) -> f64 + Sync> Norm for F {
    fn norm(&self, v: &[i64]) -> f64 {
        self(v)
    }
}

/// Value of the norm at `e_1`.
pub fn norm_e1(norm: &dyn Norm, dim: usize) -> f64 {
    let mut e1 = vec![0; dim];
    e1[0] = 1;
    norm.norm(&e1)
}

/// Geometry of the macroscopic lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroLattice {
    pub dim: usize,
    pub n: i64,
    pub rho: i64,
}

impl MacroLattice {
    /// Uses `ρ = floor(10 d mu(e_1))`.
    pub fn new(dim: usize, n: u32, mu_e1: f64) -> Self {
        let rho = floor_tol(10.0 * dim as f64 * mu_e1).max(0.0) as i64;
        Self { dim, n: n as i64, rho }
    }

    pub fn with_rho(dim: usize, n: u32, rho: i64) -> Self {
        Self { dim, n: n as i64, rho }
    }

    /// The unique site whose box contains `x`.
    pub fn site_of(&self, x: &[i64]) -> Vec<i64> {
        x.iter().map(|&c| (c + self.n).div_euclid(2 * self.n)).collect()
    }

    fn cube(&self, site: &[i64], reach: i64) -> Rect {
        Rect::new(
            site.iter().map(|&i| 2 * i * self.n - (2 * reach + 1) * self.n).collect(),
            site.iter().map(|&i| 2 * i * self.n + (2 * reach + 1) * self.n - 1).collect(),
        )
    }

    /// `Λ_N(i)`.
    pub fn box_of(&self, site: &[i64]) -> Rect {
        self.cube(site, 0)
    }

    /// `Λ'_N(i)`.
    pub fn enlarged(&self, site: &[i64]) -> Rect {
        self.cube(site, 1)
    }

    /// `Λ^ρ_N(i)`.
    pub fn rho_box(&self, site: &[i64]) -> Rect {
        self.cube(site, self.rho)
    }

    /// Sites whose box lies inside the sample box.
    pub fn sites_inside(&self, spec: &BoxSpec) -> Rect {
        let outer = Rect::of_box(spec);
        Rect::new(
            outer.lo.iter().map(|&l| (l + self.n + 2 * self.n - 1).div_euclid(2 * self.n)).collect(),
            outer.hi.iter().map(|&h| (h + 1 - self.n).div_euclid(2 * self.n)).collect(),
        )
    }
}

/// Verdict for one macroscopic site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteVerdict {
    Good {
        /// Vertex indices of the dominant cluster inside the enlarged box,
        /// sorted.
        cluster: Vec<usize>,
        /// The distance condition was checked from a random subset of
        /// sources only.
        sampled: bool,
    },
    Bad {
        /// First failing condition (1, 2 or 3).
        failed: u8,
        cluster_size: usize,
    },
    /// The enlarged box leaves the sample, or box truncation hides the
    /// answer.
    Unclassifiable,
}

impl SiteVerdict {
    pub fn is_good(&self) -> bool {
        matches!(self, SiteVerdict::Good { .. })
    }

    pub fn is_bad(&self) -> bool {
        matches!(self, SiteVerdict::Bad { .. })
    }
}

#[derive(Debug, Clone)]
pub struct MacroClassification {
    pub lattice: MacroLattice,
    pub epsilon: f64,
    /// Norm value at `e_1` used for `ρ` and for routing bounds.
    pub mu_e1: f64,
    /// Range of classified sites.
    pub sites: Rect,
    /// Verdicts in lexicographic site order over `sites`.
    pub verdicts: Vec<SiteVerdict>,
}

impl MacroClassification {
    pub fn verdict(&self, site: &[i64]) -> Option<&SiteVerdict> {
        self.sites.local_index(site).map(|i| &self.verdicts[i])
    }

    pub fn dominant_cluster(&self, site: &[i64]) -> Option<&[usize]> {
        match self.verdict(site)? {
            SiteVerdict::Good { cluster, .. } => Some(cluster),
            _ => None,
        }
    }

    pub fn sites_with(&self, pred: impl Fn(&SiteVerdict) -> bool) -> Vec<Vec<i64>> {
        self.sites.points().zip(&self.verdicts).filter(|(_, v)| pred(v)).map(|(s, _)| s).collect()
    }

    /// Fraction of bad sites among classifiable ones, and how many were
    /// classifiable.
    pub fn bad_fraction(&self) -> (f64, usize) {
        let classified = self.verdicts.iter().filter(|v| !matches!(v, SiteVerdict::Unclassifiable)).count();
        let bad = self.verdicts.iter().filter(|v| v.is_bad()).count();
        (if classified == 0 { 0.0 } else { bad as f64 / classified as f64 }, classified)
    }
}

/// Knobs for [`classify_boxes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Clusters larger than this get a sampled distance check.
    pub exact_cutoff: usize,
    /// Number of sources in the sampled check.
    pub sampled_sources: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { exact_cutoff: 512, sampled_sources: 64, seed: 0 }
    }
}

/// Classifies every site whose box lies in the sample. A site is good when
/// its enlarged box has a unique open cluster of diameter at least `N/2`
/// (using only edges inside the enlarged box), that cluster meets every
/// sub-box with `floor(eps N) + 1` points per side, and all its pairs satisfy
/// `D(x, y) <= mu(x - y) + eps N`.
pub fn classify_boxes(
    sample: &PercolationSample,
    n: u32,
    epsilon: f64,
    mu: &dyn Norm,
    options: ClassifyOptions,
) -> Result<MacroClassification, RenormError> {
    if n == 0 || epsilon.is_nan() || epsilon <= 0.0 || epsilon * (n as f64) < 1.0 {
        return Err(RenormError::Parameter(format!("need eps N >= 1, got eps = {epsilon}, N = {n}")));
    }
    let spec = sample.spec();
    let mu_e1 = norm_e1(mu, spec.dim());
    let lattice = MacroLattice::new(spec.dim(), n, mu_e1);
    let sites = lattice.sites_inside(spec);
    let all: Vec<Vec<i64>> = sites.points().collect();
    let outer = Rect::of_box(spec);
    let verdicts = all
        .par_iter()
        .map_init(
            || Scratch::new(spec.vertex_count()),
            |scratch, site| {
                let enlarged = lattice.enlarged(site);
                if !outer.contains_rect(&enlarged) {
                    return SiteVerdict::Unclassifiable;
                }
                classify_site(sample, &lattice, &enlarged, epsilon, mu, &options, site, scratch)
            },
        )
        .collect();
    Ok(MacroClassification { lattice, epsilon, mu_e1, sites, verdicts })
}

#[allow(clippy::too_many_arguments)]
fn classify_site(
    sample: &PercolationSample,
    lattice: &MacroLattice,
    enlarged: &Rect,
    epsilon: f64,
    mu: &dyn Norm,
    options: &ClassifyOptions,
    site: &[i64],
    scratch: &mut Scratch,
) -> SiteVerdict {
    let spec = sample.spec();
    let n = lattice.n;
    let local: Vec<usize> = enlarged.points().map(|x| spec.index_of(&x).expect("inside")).collect();
    let inside = DigitRange::new(spec, enlarged);
    // Condition 1: clusters of the subgraph induced on the enlarged box.
    let mut label = vec![u32::MAX; local.len()];
    let mut big: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut lo = vec![0i64; spec.dim()];
    let mut hi = vec![0i64; spec.dim()];
    let mut x = vec![0i64; spec.dim()];
    for start in 0..local.len() {
        if label[start] != u32::MAX {
            continue;
        }
        let id = start as u32;
        label[start] = id;
        queue.push_back(start);
        let mut members = Vec::new();
        lo.copy_from_slice(&enlarged.point_at(start));
        hi.copy_from_slice(&lo);
        while let Some(li) = queue.pop_front() {
            let v = local[li];
            members.push(v);
            spec.write_coords(v, &mut x);
            for a in 0..spec.dim() {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
            for u in sample.open_neighbors(v) {
                if inside.contains(spec, u) {
                    let lu = enlarged.local_index(&spec.coords_of(u)).expect("inside");
                    if label[lu] == u32::MAX {
                        label[lu] = id;
                        queue.push_back(lu);
                    }
                }
            }
        }
        let diam = lo.iter().zip(&hi).map(|(l, h)| h - l).max().unwrap_or(0);
        if 2 * diam >= n {
            big.push(members);
        }
    }
    let largest = big.iter().map(|c| c.len()).max().unwrap_or(0);
    if big.len() != 1 {
        return SiteVerdict::Bad { failed: 1, cluster_size: largest };
    }
    let mut cluster = big.pop().expect("one cluster");
    cluster.sort_unstable();
    // Condition 2: sliding sub-box counts.
    let mut grid: Vec<u32> = vec![0; local.len()];
    for &v in &cluster {
        grid[enlarged.local_index(&spec.coords_of(v)).expect("inside")] = 1;
    }
    let extent = floor_tol(epsilon * n as f64) as usize;
    if !every_window_hit(&grid, enlarged.side(0) as usize, spec.dim(), extent + 1) {
        return SiteVerdict::Bad { failed: 2, cluster_size: cluster.len() };
    }
    // Condition 3: distances inside the cluster.
    let sampled = cluster.len() > options.exact_cutoff;
    let sources: Vec<usize> = if sampled {
        let mut seed = options.seed;
        for &c in site {
            seed = seed.rotate_left(17) ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = sample_indices(&mut rng, cluster.len(), options.sampled_sources.min(cluster.len())).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| cluster[i]).collect()
    } else {
        cluster.clone()
    };
    let coords: Vec<Vec<i64>> = cluster.iter().map(|&v| spec.coords_of(v)).collect();
    let slack = epsilon * n as f64;
    for &src in &sources {
        let xs = spec.coords_of(src);
        let bounds: Vec<f64> = coords
            .iter()
            .map(|y| {
                let diff: Vec<i64> = xs.iter().zip(y).map(|(a, b)| a - b).collect();
                mu.norm(&diff) + slack
            })
            .collect();
        let horizon = bounds.iter().fold(0.0f64, |m, &b| m.max(b));
        let horizon = floor_tol(horizon).max(0.0) as u32;
        let touch = scratch.run(sample, src, horizon);
        let mut undecided = false;
        for (&y, &bound) in cluster.iter().zip(&bounds) {
            let d = scratch.dist[y];
            if d == INF || (d as f64) > floor_tol(bound) {
                let needed = floor_tol(bound).max(0.0) as u32;
                if touch.is_none_or(|tc| tc >= needed) {
                    scratch.reset();
                    return SiteVerdict::Bad { failed: 3, cluster_size: cluster.len() };
                }
                undecided = true;
            }
        }
        scratch.reset();
        if undecided {
            return SiteVerdict::Unclassifiable;
        }
    }
    SiteVerdict::Good { cluster, sampled }
}

/// Per-axis digit bounds of a rectangle inside a sample box, for fast
/// membership tests on vertex indices.
struct DigitRange {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl DigitRange {
    fn new(spec: &BoxSpec, rect: &Rect) -> Self {
        let l = spec.radius() as i64;
        let lo = (0..spec.dim()).map(|a| (rect.lo[a] - spec.offset()[a] + l) as usize).collect();
        let hi = (0..spec.dim()).map(|a| (rect.hi[a] - spec.offset()[a] + l) as usize).collect();
        Self { lo, hi }
    }

    fn contains(&self, spec: &BoxSpec, v: usize) -> bool {
        (0..spec.dim()).all(|a| {
            let c = spec.digit(v, a);
            self.lo[a] <= c && c <= self.hi[a]
        })
    }
}

/// Whether every axis-aligned window of `w` points per side contains a
/// nonzero entry of a cubic grid of side `side`.
fn every_window_hit(grid: &[u32], side: usize, dim: usize, w: usize) -> bool {
    if w > side {
        return grid.iter().any(|&g| g > 0);
    }
    let mut cur = grid.to_vec();
    let mut shape = vec![side; dim];
    for axis in 0..dim {
        let out_len = shape[axis] - w + 1;
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut next = vec![0u32; outer * out_len * inner];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * shape[axis] + k) * inner + i;
                let mut acc: u32 = (0..w).map(|k| cur[at(k)]).sum();
                next[(o * out_len) * inner + i] = acc;
                for k in 1..out_len {
                    acc = acc + cur[at(k + w - 1)] - cur[at(k - 1)];
                    next[(o * out_len + k) * inner + i] = acc;
                }
            }
        }
        shape[axis] = out_len;
        cur = next;
    }
    cur.iter().all(|&c| c > 0)
}

/// Reusable breadth-first search state.
pub(crate) struct Scratch {
    pub(crate) dist: Vec<u32>,
    touched: Vec<usize>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self { dist: vec![INF; n], touched: Vec::new() }
    }

    /// Grows to `horizon` from `src`; returns the first face-contact time.
    pub(crate) fn run(&mut self, sample: &PercolationSample, src: usize, horizon: u32) -> Option<u32> {
        let spec = sample.spec();
        let masks = sample.open_masks();
        let strides = spec.strides();
        self.dist[src] = 0;
        self.touched.push(src);
        let mut touch = spec.is_face_vertex(src).then_some(0);
        let mut head = 0;
        while head < self.touched.len() {
            let v = self.touched[head];
            head += 1;
            let dv = self.dist[v];
            if dv >= horizon {
                continue;
            }
            let m = masks[v];
            for a in 0..spec.dim() {
                for (bit, u) in [(2 * a, v.wrapping_add(strides[a])), (2 * a + 1, v.wrapping_sub(strides[a]))] {
                    if (m >> bit) & 1 == 1 && self.dist[u] == INF {
                        self.dist[u] = dv + 1;
                        self.touched.push(u);
                        if touch.is_none() && spec.is_face_vertex(u) {
                            touch = Some(dv + 1);
                        }
                    }
                }
            }
        }
        touch
    }

    pub(crate) fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v] = INF;
        }
        self.touched.clear();
    }
}

/// Connected components of bad sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadClusters {
    /// Components under `l_inf`-adjacency, each sorted, ordered by first site.
    pub star: Vec<Vec<Vec<i64>>>,
    /// Components under nearest-neighbour adjacency.
    pub lattice: Vec<Vec<Vec<i64>>>,
}

impl BadClusters {
    pub fn star_sizes(&self) -> Vec<usize> {
        self.star.iter().map(|c| c.len()).collect()
    }

    pub fn lattice_sizes(&self) -> Vec<usize> {
        self.lattice.iter().map(|c| c.len()).collect()
    }
}

pub fn bad_clusters(classification: &MacroClassification) -> BadClusters {
    let bad = classification.sites_with(SiteVerdict::is_bad);
    let dim = classification.sites.dim();
    BadClusters {
        star: components(&bad, &geometry::star_offsets(dim)),
        lattice: components(&bad, &geometry::unit_offsets(dim)),
    }
}

/// Components of a point set under the adjacency given by `offsets`.
pub fn components(points: &[Vec<i64>], offsets: &[Vec<i64>]) -> Vec<Vec<Vec<i64>>> {
    let index: HashMap<&[i64], usize> = points.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    let mut seen = vec![false; points.len()];
    let mut out = Vec::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(points[i].clone());
            for off in offsets {
                let q = geometry::add(&points[i], off);
                if let Some(&j) = index.get(q.as_slice()) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out.sort();
    out
}

/// Open path from `x` to `y` through the good boxes of `macro_path`, built
/// by chaining geodesics inside `∪ Λ^ρ_N(i)`: from the current point to the
/// nearest vertex of `C(i_m) ∩ Λ_N(i_m)` for each site in turn, then to `y`.
/// Loops are erased. Fails if the result exceeds `2d mu(e_1) N |Γ|`.
pub fn route_through_good(
    sample: &PercolationSample,
    classification: &MacroClassification,
    macro_path: &[Vec<i64>],
    x: usize,
    y: usize,
) -> Result<Vec<usize>, RenormError> {
    let spec = sample.spec();
    let lattice = &classification.lattice;
    let first = macro_path.first().ok_or_else(|| RenormError::Parameter("empty macro path".into()))?;
    let last = macro_path.last().expect("non-empty");
    for s in macro_path {
        if classification.dominant_cluster(s).is_none() {
            return Err(RenormError::NotGood(s.clone()));
        }
    }
    for w in macro_path.windows(2) {
        if geometry::linf(&w[0], &w[1]) > 1 {
            return Err(RenormError::NotAdjacent(w[0].clone(), w[1].clone()));
        }
    }
    let anchors = |site: &[i64]| -> Vec<usize> {
        let b = lattice.box_of(site);
        classification.dominant_cluster(site).expect("good").iter().copied().filter(|&v| b.contains(&spec.coords_of(v))).collect()
    };
    for (v, site) in [(x, first), (y, last)] {
        if anchors(site).binary_search(&v).is_err() {
            return Err(RenormError::EndpointNotInCluster(spec.coords_of(v)));
        }
    }
    let mut region = Region::empty(spec);
    for s in macro_path {
        region.union_with(&lattice.rho_box(s).region_in(spec));
    }
    let mut route = vec![x];
    let mut targets: Vec<Vec<usize>> = macro_path.iter().map(|s| anchors(s)).collect();
    targets.push(vec![y]);
    for goal in targets {
        let cur = *route.last().expect("non-empty");
        if goal.binary_search(&cur).is_ok() {
            continue;
        }
        let (ball, best) = metric::constrained_ball(sample, &region, &[cur], &goal)?.expect("non-empty endpoints");
        let best = best.ok_or(RenormError::NoRoute)?;
        let leg = metric::geodesic(sample, &ball, best)?;
        route.extend_from_slice(&leg[1..]);
    }
    let route = erase_loops(&route);
    let distinct: std::collections::BTreeSet<&Vec<i64>> = macro_path.iter().collect();
    let bound = 2.0 * spec.dim() as f64 * classification.mu_e1 * lattice.n as f64 * distinct.len() as f64;
    if (route.len() - 1) as f64 > bound + 1e-9 {
        return Err(RenormError::RouteTooLong { length: route.len() - 1, bound });
    }
    Ok(route)
}

/// Chronological loop erasure.
pub fn erase_loops(path: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(path.len());
    let mut pos: HashMap<usize, usize> = HashMap::new();
    for &v in path {
        if let Some(&i) = pos.get(&v) {
            for u in out.drain(i + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

/// Parameters of the slab experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabParams {
    pub epsilon: f64,
    pub xi: f64,
    /// Macroscopic side `N`.
    pub big_n: u32,
    pub n: u32,
    /// Estimate of `mu(e_1)`.
    pub mu_e1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabOutcome {
    /// Macroscopic offset `z` of the slab in axes `3..d`.
    pub slab: Vec<i64>,
    pub distance: Option<u32>,
    /// `D > (mu + xi) n`, counting infinite distance as an occurrence.
    pub event: bool,
    pub contaminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabRecord {
    pub slabs: Vec<SlabOutcome>,
    /// Unconstrained `D(Λ_{eps n}(0), Λ_{eps n}(n e_1))`.
    pub box_distance: Option<u32>,
    /// `D > (1 + xi) mu n` for the two boxes on the infinite lattice, when
    /// decided; otherwise the in-box value.
    pub box_event: bool,
    /// Paths outside the sample box could change `box_event`.
    pub box_contaminated: bool,
}

/// Box-to-box distances inside disjoint slabs `Z^2 × {z}` of the
/// macroscopic lattice, together with the unconstrained box-to-box
/// distance. Slabs are spaced `2ρ + 1` sites apart so that their thickened
/// regions `∪ Λ^ρ_N(i)` are disjoint; slab `z` uses the source set
/// `[-eps n, eps n]^2 × (2zN + [-ρN, ρN]^{d-2})` and its translate by `n e_1`.
pub fn slab_experiment(sample: &PercolationSample, params: &SlabParams) -> Result<SlabRecord, RenormError> {
    let spec = sample.spec();
    let d = spec.dim();
    if d < 3 {
        return Err(RenormError::Parameter("slab experiment needs d >= 3".into()));
    }
    if params.big_n == 0 || params.n == 0 || params.epsilon.is_nan() || params.epsilon < 0.0 {
        return Err(RenormError::Parameter("N, n must be positive and eps >= 0".into()));
    }
    let lattice = MacroLattice::new(d, params.big_n, params.mu_e1);
    let big_n = lattice.n;
    let rho = lattice.rho;
    let e = floor_tol(params.epsilon * params.n as f64) as i64;
    let n = params.n as i64;
    let outer = Rect::of_box(spec);
    let mut shift = vec![0; d];
    shift[0] = n;
    let source_for = |z: &[i64]| -> Rect {
        let mut lo = vec![-e, -e];
        let mut hi = vec![e, e];
        for &zk in z {
            lo.push(2 * zk * big_n - rho * big_n);
            hi.push(2 * zk * big_n + rho * big_n);
        }
        Rect::new(lo, hi)
    };
    let fits = |z: &[i64]| {
        let s = source_for(z);
        outer.contains_rect(&s) && outer.contains_rect(&s.translate(&shift))
    };
    let zero = vec![0i64; d - 2];
    if !fits(&zero) {
        return Err(RenormError::Geometry);
    }
    let step = 2 * rho + 1;
    let reach = (floor_tol(params.epsilon * params.n as f64 / (2.0 * big_n as f64)) as i64) / step;
    let zs: Vec<Vec<i64>> = Rect::cube(&zero, reach)
        .points()
        .map(|k| k.iter().map(|c| c * step).collect::<Vec<i64>>())
        .filter(|z| fits(z))
        .collect();
    let slab_threshold = (params.mu_e1 + params.xi) * params.n as f64;
    let slabs = zs
        .par_iter()
        .map(|z| {
            let mut lo = outer.lo.clone();
            let mut hi = outer.hi.clone();
            for (k, &zk) in z.iter().enumerate() {
                lo[k + 2] = 2 * zk * big_n - (2 * rho + 1) * big_n;
                hi[k + 2] = 2 * zk * big_n + (2 * rho + 1) * big_n - 1;
            }
            let region = Rect::new(lo, hi).intersect(&outer).region_in(spec);
            let src = source_for(z);
            let from = src.vertices_in(spec);
            let to = src.translate(&shift).vertices_in(spec);
            let (ball, best) = metric::constrained_ball(sample, &region, &from, &to)?.expect("non-empty");
            let distance = best.and_then(|v| ball.dist(v));
            let contaminated = match (ball.touch_time(), distance) {
                (None, _) => false,
                (Some(tc), Some(dv)) => dv > tc,
                (Some(_), None) => true,
            };
            let event = distance.is_none_or(|dv| dv as f64 > floor_tol(slab_threshold));
            Ok(SlabOutcome { slab: z.clone(), distance, event, contaminated })
        })
        .collect::<Result<Vec<_>, RenormError>>()?;
    let cube = Rect::cube(&vec![0; d], e);
    let from = cube.vertices_in(spec);
    let to = cube.translate(&shift).vertices_in(spec);
    if from.len() != cube.len() || to.len() != cube.len() {
        return Err(RenormError::Geometry);
    }
    let dist = metric::set_distance(sample, &from, &to)?;
    let box_threshold = floor_tol((1.0 + params.xi) * params.mu_e1 * params.n as f64);
    let decided = if dist.contaminated {
        metric::exceeds_within_box(sample, &from, &to, box_threshold.max(0.0) as u32)?
    } else {
        Some(dist.value.is_none_or(|dv| dv as f64 > box_threshold))
    };
    Ok(SlabRecord {
        slabs,
        box_distance: dist.value,
        box_event: decided.unwrap_or_else(|| dist.value.is_none_or(|dv| dv as f64 > box_threshold)),
        box_contaminated: decided.is_none(),
    })
}

/// Writes `site coords, verdict, failed_condition, cluster_size` rows.
pub fn write_classification<W: Write>(classification: &MacroClassification, mut out: W) -> io::Result<()> {
    let dim = classification.sites.dim();
    let header: Vec<String> = (1..=dim).map(|a| format!("i{a}")).collect();
    writeln!(out, "{},verdict,failed_condition,cluster_size,sampled", header.join(","))?;
    for (site, verdict) in classification.sites.points().zip(&classification.verdicts) {
        for c in &site {
            write!(out, "{c},")?;
        }
        match verdict {
            SiteVerdict::Good { cluster, sampled } => writeln!(out, "good,0,{},{}", cluster.len(), *sampled as u8)?,
            SiteVerdict::Bad { failed, cluster_size } => writeln!(out, "bad,{failed},{cluster_size},0")?,
            SiteVerdict::Unclassifiable => writeln!(out, "unclassifiable,0,0,0")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macro_boxes_partition_the_lattice() {
        let m = MacroLattice::with_rho(2, 3, 1);
        for x in -20..20 {
            for y in -20..20 {
                let p = vec![x, y];
                let s = m.site_of(&p);
                assert!(m.box_of(&s).contains(&p));
                assert!(!m.box_of(&[s[0] + 1, s[1]]).contains(&p));
            }
        }
        assert_eq!(m.box_of(&[0, 0]), Rect::new(vec![-3, -3], vec![2, 2]));
        assert_eq!(m.enlarged(&[1, 0]), Rect::new(vec![-3, -9], vec![14, 8]));
    }

    #[test]
    fn sites_inside_box() {
        let spec = BoxSpec::new(2, 10).unwrap();
        let m = MacroLattice::with_rho(2, 3, 1);
        let s = m.sites_inside(&spec);
        for site in s.points() {
            assert!(Rect::of_box(&spec).contains_rect(&m.box_of(&site)));
        }
        assert_eq!(s, Rect::new(vec![-1, -1], vec![1, 1]));
    }

    #[test]
    fn window_check_matches_brute_force() {
        let side = 6;
        let mut grid = vec![0u32; side * side];
        for (i, g) in grid.iter_mut().enumerate() {
            *g = ((i * 7) % 5 == 0) as u32;
        }
        for w in 1..=side {
            let mut brute = true;
            for a in 0..=side - w {
                for b in 0..=side - w {
                    let hit = (a..a + w).any(|i| (b..b + w).any(|j| grid[i * side + j] > 0));
                    brute &= hit;
                }
            }
            assert_eq!(every_window_hit(&grid, side, 2, w), brute, "w = {w}");
        }
    }

    #[test]
    fn loop_erasure() {
        assert_eq!(erase_loops(&[1, 2, 3, 2, 4, 1, 5]), vec![1, 5]);
        assert_eq!(erase_loops(&[1, 2, 3]), vec![1, 2, 3]);
    }

    #[test]
    fn components_under_both_adjacencies() {
        let pts = vec![vec![0, 0], vec![1, 1], vec![3, 3]];
        assert_eq!(components(&pts, &geometry::star_offsets(2)).len(), 2);
        assert_eq!(components(&pts, &geometry::unit_offsets(2)).len(), 3);
    }
}
