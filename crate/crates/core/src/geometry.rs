//! Axis-aligned integer boxes and small lattice-geometry helpers.

use crate::lattice::BoxSpec;
use crate::metric::Region;

/// The integer points `lo <= x <= hi` (inclusive on both ends).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rect {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Rect {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    /// `center + [-r, r]^d`.
    pub fn cube(center: &[i64], r: i64) -> Self {
        Self::new(center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
    }

    /// The points of a sample box.
    pub fn of_box(spec: &BoxSpec) -> Self {
        Self::cube(spec.offset(), spec.radius() as i64)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as usize).product()
    }

    pub fn side(&self, axis: usize) -> i64 {
        self.hi[axis] - self.lo[axis] + 1
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.is_empty() || (self.contains(&other.lo) && self.contains(&other.hi))
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        Rect::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect(),
        )
    }

    pub fn translate(&self, by: &[i64]) -> Rect {
        Rect::new(
            self.lo.iter().zip(by).map(|(a, b)| a + b).collect(),
            self.hi.iter().zip(by).map(|(a, b)| a + b).collect(),
        )
    }

    /// Whether `x` is on the inner boundary (some coordinate at `lo` or `hi`).
    pub fn on_face(&self, x: &[i64]) -> bool {
        self.contains(x) && x.iter().zip(self.lo.iter().zip(&self.hi)).any(|(v, (l, h))| v == l || v == h)
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> RectPoints<'_> {
        RectPoints { rect: self, next: (!self.is_empty()).then(|| self.lo.clone()) }
    }

    /// Local index of a contained point, lexicographic with the first axis
    /// most significant.
    pub fn local_index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.side(a) as usize + (x[a] - self.lo[a]) as usize;
        }
        Some(idx)
    }

    pub fn point_at(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let s = self.side(a) as usize;
            out[a] = self.lo[a] + (idx % s) as i64;
            idx /= s;
        }
        out
    }

    /// Vertex indices of the points inside a sample box.
    pub fn vertices_in(&self, spec: &BoxSpec) -> Vec<usize> {
        let clipped = self.intersect(&Rect::of_box(spec));
        clipped.points().map(|x| spec.index_of(&x).expect("clipped")).collect()
    }

    pub fn region_in(&self, spec: &BoxSpec) -> Region {
        Region::from_vertices(spec, &self.vertices_in(spec))
    }
}

pub struct RectPoints<'a> {
    rect: &'a Rect,
    next: Option<Vec<i64>>,
}

impl Iterator for RectPoints<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        for a in (0..succ.len()).rev() {
            if succ[a] < self.rect.hi[a] {
                succ[a] += 1;
                self.next = Some(succ);
                break;
            }
            succ[a] = self.rect.lo[a];
        }
        Some(cur)
    }
}

/// `Diam(S) = max_i (max_{x in S} x_i - min_{x in S} x_i)`; zero for empty
/// sets.
pub fn diameter(points: &[Vec<i64>]) -> i64 {
    let Some(first) = points.first() else { return 0 };
    (0..first.len())
        .map(|a| {
            let (lo, hi) = points.iter().fold((i64::MAX, i64::MIN), |(l, h), p| (l.min(p[a]), h.max(p[a])));
            hi - lo
        })
        .max()
        .unwrap_or(0)
}

pub fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn linf(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// The `3^d - 1` offsets of `l_inf` norm one.
pub fn star_offsets(dim: usize) -> Vec<Vec<i64>> {
    let cube = Rect::cube(&vec![0; dim], 1);
    cube.points().filter(|p| p.iter().any(|&c| c != 0)).collect()
}

/// The `2d` offsets `±e_a`.
pub fn unit_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for a in 0..dim {
        for s in [-1, 1] {
            let mut v = vec![0; dim];
            v[a] = s;
            out.push(v);
        }
    }
    out
}

pub fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
