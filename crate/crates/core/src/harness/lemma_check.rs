//! Random instances for the combinatorial constructions and their
//! per-instance verification rows.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{
    self, axis_avoiding_paths, count_lattice_animals, default_chi, disjoint_path_bundle, distinct_coordinate_subset,
    exterior_boundary, projection_best, separated_matching, BundleGeometry, PointSet, DEFAULT_KAPPA,
};
use crate::geometry::{add, unit_offsets, Rect};
use crate::harness::parallel::replicate_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// A large projection along some axis.
    Proj,
    /// A subset distinct in two coordinates.
    Distinct,
    /// A separated matching between parallel hyperplanes.
    Dislines,
    BundleParallel,
    BundlePerpendicular,
    /// Disjoint detours avoiding the third axis.
    Claim,
    /// Exterior boundary connectivity and isoperimetry.
    Exterior,
    Animals,
}

pub const ALL_LEMMAS: [Lemma; 8] = [
    Lemma::Proj,
    Lemma::Distinct,
    Lemma::Dislines,
    Lemma::BundleParallel,
    Lemma::BundlePerpendicular,
    Lemma::Claim,
    Lemma::Exterior,
    Lemma::Animals,
];

impl Lemma {
    pub fn name(self) -> &'static str {
        match self {
            Lemma::Proj => "proj",
            Lemma::Distinct => "distinct",
            Lemma::Dislines => "dislines",
            Lemma::BundleParallel => "bundle-parallel",
            Lemma::BundlePerpendicular => "bundle-perpendicular",
            Lemma::Claim => "claim",
            Lemma::Exterior => "exterior",
            Lemma::Animals => "animals",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lemma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ALL_LEMMAS.iter().copied().find(|l| l.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ALL_LEMMAS.iter().map(|l| l.name()).collect();
            format!("unknown lemma {s:?}; expected one of {}", names.join(", "))
        })
    }
}

/// One verification row.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub instance: u64,
    pub lemma: Lemma,
    pub dim: usize,
    pub size: usize,
    pub bound: f64,
    pub achieved: f64,
    pub pass: bool,
    /// Why a row failed or could not be built.
    pub note: String,
}

pub fn instance_rng(seed: u64, instance: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(seed, instance))
}

/// `size` distinct points drawn uniformly from `rect`.
pub fn random_subset(rng: &mut impl Rng, rect: &Rect, size: usize) -> Vec<Vec<i64>> {
    let size = size.min(rect.len());
    sample_indices(rng, rect.len(), size).into_iter().map(|i| rect.point_at(i)).collect()
}

/// Uniform subset of `[-20, 20]^d`, `d` in `{2, 3, 4}`, of size up to
/// 5000 (or the box size).
pub fn proj_instance(rng: &mut impl Rng, dim: Option<usize>) -> PointSet {
    let d = dim.unwrap_or_else(|| rng.random_range(2..=4));
    let rect = Rect::cube(&vec![0; d], 20);
    let size = rng.random_range(1..=5000usize.min(rect.len()));
    PointSet::new(d, random_subset(rng, &rect, size)).expect("consistent")
}

/// Uniform subset of `[-15, 15]^d`, `d` in `{2, 3, 4}`, of size up to
/// 2000.
pub fn distinct_instance(rng: &mut impl Rng, dim: Option<usize>) -> PointSet {
    let d = dim.unwrap_or_else(|| rng.random_range(2..=4));
    let rect = Rect::cube(&vec![0; d], 15);
    let size = rng.random_range(1..=2000usize.min(rect.len()));
    PointSet::new(d, random_subset(rng, &rect, size)).expect("consistent")
}

/// Two point sets on `x_1 = 0` and `x_1 = ell`, transverse coordinates in
/// `[0, K]^(d-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelInstance {
    pub s1: PointSet,
    pub s2: PointSet,
    pub ell: i64,
    pub spread: i64,
}

pub fn parallel_instance(rng: &mut impl Rng, equal_sizes: bool) -> ParallelInstance {
    let d = 3;
    let spread = rng.random_range(1..=20i64);
    let ell = rng.random_range(1..=spread);
    let face = Rect::new(vec![0; d - 1], vec![spread; d - 1]);
    let cap = 40usize.min(face.len());
    let m1 = rng.random_range(1..=cap);
    let m2 = if equal_sizes { m1 } else { rng.random_range(1..=cap) };
    let lift = |pts: Vec<Vec<i64>>, level: i64| -> PointSet {
        PointSet::new(d, pts.into_iter().map(|p| [vec![level], p].concat())).expect("consistent")
    };
    let s1 = lift(random_subset(rng, &face, m1), 0);
    let s2 = lift(random_subset(rng, &face, m2), ell);
    ParallelInstance { s1, s2, ell, spread }
}

/// `S1` on `x_1 = 0`, `S2` on `x_2 = 0`, inside `[-K, K]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerpendicularInstance {
    pub s1: PointSet,
    pub s2: PointSet,
    pub spread: i64,
}

pub fn perpendicular_instance(rng: &mut impl Rng) -> PerpendicularInstance {
    let spread = rng.random_range(2..=20i64);
    let face = Rect::cube(&[0, 0], spread);
    let m1 = rng.random_range(1..=40usize);
    let m2 = rng.random_range(1..=40usize);
    let s1 = PointSet::new(3, random_subset(rng, &face, m1).into_iter().map(|p| vec![0, p[0], p[1]])).expect("consistent");
    let s2 = PointSet::new(3, random_subset(rng, &face, m2).into_iter().map(|p| vec![p[0], 0, p[1]])).expect("consistent");
    PerpendicularInstance { s1, s2, spread }
}

/// `n <= 20` mirror pairs `(-2n, z)`, `(2n, z)` with distinct
/// `z in [-n, n]^2`.
pub fn claim_instance(rng: &mut impl Rng) -> Vec<(Vec<i64>, Vec<i64>)> {
    let n = rng.random_range(1..=20i64);
    let zs = random_subset(rng, &Rect::cube(&[0, 0], n), n as usize);
    zs.into_iter().map(|z| (vec![-2 * n, z[0], z[1]], vec![2 * n, z[0], z[1]])).collect()
}

/// A connected set grown from the origin by random unit steps, with
/// `d in {2, 3}` and up to 500 vertices.
pub fn connected_instance(rng: &mut impl Rng, dim: Option<usize>) -> PointSet {
    let d = dim.unwrap_or_else(|| rng.random_range(2..=3));
    let target = rng.random_range(1..=500usize);
    let units = unit_offsets(d);
    let mut members = vec![vec![0i64; d]];
    let mut seen = std::collections::HashSet::from([vec![0i64; d]]);
    while members.len() < target {
        let from = &members[rng.random_range(0..members.len())];
        let next = add(from, &units[rng.random_range(0..units.len())]);
        if seen.insert(next.clone()) {
            members.push(next);
        }
    }
    PointSet::new(d, members).expect("consistent")
}

/// Bounding box of `set` widened by `margin`.
pub fn ambient_box(set: &PointSet, margin: i64) -> Rect {
    let d = set.dim();
    let lo = (0..d).map(|a| set.points().iter().map(|p| p[a]).min().unwrap_or(0) - margin).collect();
    let hi = (0..d).map(|a| set.points().iter().map(|p| p[a]).max().unwrap_or(0) + margin).collect();
    Rect::new(lo, hi)
}

fn row(instance: u64, lemma: Lemma, dim: usize, size: usize, check: combinatorics::Check, note: &str) -> LemmaRow {
    LemmaRow { instance, lemma, dim, size, bound: check.bound, achieved: check.achieved, pass: check.pass, note: note.to_string() }
}

fn error_row(instance: u64, lemma: Lemma, dim: usize, size: usize, err: impl fmt::Display) -> LemmaRow {
    LemmaRow { instance, lemma, dim, size, bound: f64::NAN, achieved: f64::NAN, pass: false, note: err.to_string() }
}

/// Builds instance `instance` of `lemma` and verifies the construction.
/// `dim` pins the dimension where the generator allows a choice.
pub fn check_instance(lemma: Lemma, seed: u64, instance: u64, dim: Option<usize>) -> LemmaRow {
    let mut rng = instance_rng(seed, instance);
    match lemma {
        Lemma::Proj => {
            let s = proj_instance(&mut rng, dim);
            match projection_best(&s) {
                Ok(r) => row(instance, lemma, s.dim(), s.len(), r.verify(), ""),
                Err(e) => error_row(instance, lemma, s.dim(), s.len(), e),
            }
        }
        Lemma::Distinct => {
            let s = distinct_instance(&mut rng, dim);
            match distinct_coordinate_subset(&s) {
                Ok(r) => row(instance, lemma, s.dim(), s.len(), r.verify(&s), ""),
                Err(e) => error_row(instance, lemma, s.dim(), s.len(), e),
            }
        }
        Lemma::Dislines => {
            let inst = parallel_instance(&mut rng, true);
            match separated_matching(&inst.s1, &inst.s2, 0, inst.ell, inst.spread) {
                Ok(m) => row(instance, lemma, 3, inst.s1.len(), m.verify(), ""),
                Err(e) => error_row(instance, lemma, 3, inst.s1.len(), e),
            }
        }
        Lemma::BundleParallel => {
            let inst = parallel_instance(&mut rng, false);
            let g = BundleGeometry::Parallel { axis: 0, ell: inst.ell, spread: inst.spread };
            match disjoint_path_bundle(&inst.s1, &inst.s2, g, default_chi(3)) {
                Ok(b) => row(instance, lemma, 3, b.paths.len(), b.verify(&inst.s1, &inst.s2), ""),
                Err(e) => error_row(instance, lemma, 3, 0, e),
            }
        }
        Lemma::BundlePerpendicular => {
            let inst = perpendicular_instance(&mut rng);
            let g = BundleGeometry::Perpendicular { i: 0, j: 1, spread: inst.spread };
            match disjoint_path_bundle(&inst.s1, &inst.s2, g, default_chi(3)) {
                Ok(b) => row(instance, lemma, 3, b.paths.len(), b.verify(&inst.s1, &inst.s2), ""),
                Err(e) => error_row(instance, lemma, 3, 0, e),
            }
        }
        Lemma::Claim => {
            let pairs = claim_instance(&mut rng);
            match axis_avoiding_paths(&pairs) {
                Ok(p) => row(instance, lemma, 3, pairs.len(), p.verify(&pairs), ""),
                Err(e) => error_row(instance, lemma, 3, pairs.len(), e),
            }
        }
        Lemma::Exterior => {
            let g = connected_instance(&mut rng, dim);
            match exterior_boundary(&g, &ambient_box(&g, 2)) {
                Ok(b) => {
                    let iso = b.isoperimetry(g.len(), DEFAULT_KAPPA);
                    let pass = iso.pass && b.star_connected;
                    let note = if b.star_connected { "" } else { "boundary not *-connected" };
                    LemmaRow { pass, ..row(instance, lemma, g.dim(), g.len(), iso, note) }
                }
                Err(e) => error_row(instance, lemma, g.dim(), g.len(), e),
            }
        }
        Lemma::Animals => {
            let d = dim.unwrap_or_else(|| rng.random_range(2..=3));
            let k = rng.random_range(1..=combinatorics::MAX_ANIMAL_WORK / d);
            let bound = 7f64.powi((d * k) as i32);
            match count_lattice_animals(d, k) {
                Ok(c) => LemmaRow {
                    instance,
                    lemma,
                    dim: d,
                    size: k,
                    bound,
                    achieved: c as f64,
                    pass: (c as f64) <= bound,
                    note: String::new(),
                },
                Err(e) => error_row(instance, lemma, d, k, e),
            }
        }
    }
}

pub fn run_lemma_check(lemma: Lemma, instances: u64, seed: u64, dim: Option<usize>) -> Vec<LemmaRow> {
    (0..instances).map(|i| check_instance(lemma, seed, i, dim)).collect()
}
