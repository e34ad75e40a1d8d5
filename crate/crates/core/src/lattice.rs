//! Finite boxes of `Z^d`, canonical edge indexing, seeded Bernoulli bond
//! sampling and open-cluster labeling.
//!
//! # Vertex and edge indexing
//!
//! A [`BoxSpec`] covers the integer points `offset + [-L, L]^d`. Vertices are
//! indexed lexicographically with the first coordinate most significant: with
//! `c_a = x_a - offset_a + L` and `W = 2L + 1`,
//! `index(x) = sum_a c_a * W^(d-1-a)`.
//!
//! Edges are grouped axis-major. The edge `<v, v + e_a>` belongs to family `a`
//! and is identified by its lower endpoint `v` (which needs `c_a < 2L`). Inside
//! a family the lower endpoint is ranked lexicographically in the mixed radix
//! where axis `a` has `2L` digits and every other axis `2L + 1`. The global
//! index is `a * F + rank`, with `F = (2L + 1)^(d-1) * 2L`. Edges leaving the
//! box do not exist (free boundary).
//!
//! # Sampling scheme
//!
//! Edge `e` reads the `e`-th 32-bit word `u_e` of the ChaCha8 keystream seeded
//! with `seed_from_u64(seed)` and is open iff `u_e < floor(p * 2^32)`. The same
//! seed therefore couples all values of `p` monotonically, and any range of
//! edges can be generated independently of the others.

use std::sync::OnceLock;

use bitvec::prelude::*;
use petgraph::unionfind::UnionFind;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Supported dimensions.
pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 6;
/// Resource guard on the number of vertices of a box.
pub const MAX_VERTICES: usize = 100_000_000;

const SAMPLE_MAGIC: &[u8; 4] = b"CLPS";
const SAMPLE_VERSION: u16 = 1;
const SAMPLE_CHUNK: usize = 1 << 16;

pub type EdgeBits = BitVec<u8, Lsb0>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension {0} outside supported range {MIN_DIM}..={MAX_DIM}")]
    Dimension(usize),
    #[error("radius must be at least 1")]
    Radius,
    #[error("box with {0} vertices exceeds the limit of {MAX_VERTICES}")]
    TooLarge(u128),
    #[error("offset has {got} coordinates, expected {expected}")]
    OffsetLength { expected: usize, got: usize },
    #[error("edge probability {0} outside (0, 1)")]
    Probability(f64),
    #[error("point {0:?} is outside the box")]
    OutsideBox(Vec<i64>),
    #[error("edge index {0} out of range")]
    EdgeIndex(usize),
    #[error("expected {expected} edge bits, got {got}")]
    BitLength { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("input truncated")]
    Truncated,
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("invalid header: {0}")]
    Header(#[from] LatticeError),
    #[error("probability field is not a finite value in [0, 1]")]
    Probability,
    #[error("payload is {got} bytes, expected {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("padding bits after the last edge are not zero")]
    Padding,
}

/// The finite box `offset + [-L, L]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxSpec {
    dim: usize,
    radius: u32,
    offset: Vec<i64>,
}

impl BoxSpec {
    pub fn new(dim: usize, radius: u32) -> Result<Self, LatticeError> {
        Self::with_offset(dim, radius, vec![0; dim])
    }

    pub fn with_offset(dim: usize, radius: u32, offset: Vec<i64>) -> Result<Self, LatticeError> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(LatticeError::Dimension(dim));
        }
        if radius == 0 {
            return Err(LatticeError::Radius);
        }
        if offset.len() != dim {
            return Err(LatticeError::OffsetLength { expected: dim, got: offset.len() });
        }
        let side = 2 * radius as u128 + 1;
        let vertices = side.pow(dim as u32);
        if vertices > MAX_VERTICES as u128 {
            return Err(LatticeError::TooLarge(vertices));
        }
        Ok(Self { dim, radius, offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offset(&self) -> &[i64] {
        &self.offset
    }

    /// Number of vertices per axis, `2L + 1`.
    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    /// Edges in one axis family, `(2L + 1)^(d-1) * 2L`.
    pub fn family_size(&self) -> usize {
        self.side().pow(self.dim as u32 - 1) * 2 * self.radius as usize
    }

    pub fn edge_count(&self) -> usize {
        self.dim * self.family_size()
    }

    /// Vertex-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let side = self.side();
        (0..self.dim).map(|a| side.pow((self.dim - 1 - a) as u32)).collect()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let l = self.radius as i64;
        x.len() == self.dim && x.iter().zip(&self.offset).all(|(&xi, &o)| (xi - o).abs() <= l)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let l = self.radius as i64;
        let side = self.side();
        Some(x.iter().zip(&self.offset).fold(0usize, |acc, (&xi, &o)| acc * side + (xi - o + l) as usize))
    }

    pub fn coords_of(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        self.write_coords(index, &mut out);
        out
    }

    pub fn write_coords(&self, mut index: usize, out: &mut [i64]) {
        let side = self.side();
        let l = self.radius as i64;
        for a in (0..self.dim).rev() {
            out[a] = (index % side) as i64 - l + self.offset[a];
            index /= side;
        }
    }

    /// Per-axis digit `c_a in [0, 2L]` of a vertex index.
    pub fn digit(&self, index: usize, axis: usize) -> usize {
        (index / self.side().pow((self.dim - 1 - axis) as u32)) % self.side()
    }

    /// Whether the vertex lies on a face of the box.
    pub fn is_face_vertex(&self, index: usize) -> bool {
        let side = self.side();
        let mut rest = index;
        for _ in 0..self.dim {
            let c = rest % side;
            if c == 0 || c == side - 1 {
                return true;
            }
            rest /= side;
        }
        false
    }

    /// Bitmask of the `2d` faces the vertex lies on: bit `2a` for the upper
    /// face of axis `a`, bit `2a + 1` for the lower one.
    pub fn face_mask(&self, index: usize) -> u32 {
        let side = self.side();
        let mut rest = index;
        let mut mask = 0u32;
        for a in (0..self.dim).rev() {
            let c = rest % side;
            if c == side - 1 {
                mask |= 1 << (2 * a);
            }
            if c == 0 {
                mask |= 1 << (2 * a + 1);
            }
            rest /= side;
        }
        mask
    }

    /// `l_inf` distance from `x` to the nearest face, i.e. the largest radius
    /// of a cube around `x` that stays strictly inside except for its surface.
    pub fn face_distance(&self, x: &[i64]) -> Option<u32> {
        if !self.contains(x) {
            return None;
        }
        let l = self.radius as i64;
        x.iter().zip(&self.offset).map(|(&xi, &o)| (l - (xi - o).abs()) as u32).min()
    }

    /// Index of the edge `<v, v + e_axis>` given the vertex index of `v`.
    pub fn edge_from(&self, lower: usize, axis: usize) -> Option<usize> {
        let side = self.side();
        let two_l = side - 1;
        let mut rest = lower;
        let mut digits = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            digits[a] = rest % side;
            rest /= side;
        }
        if digits[axis] >= two_l {
            return None;
        }
        let mut rank = 0usize;
        for (a, &c) in digits.iter().enumerate().take(self.dim) {
            let radix = if a == axis { two_l } else { side };
            rank = rank * radix + c;
        }
        Some(axis * self.family_size() + rank)
    }

    /// Index of the edge between two adjacent vertex indices.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let diff = hi - lo;
        let axis = self.strides().iter().position(|&s| s == diff)?;
        if self.digit(hi, axis) != self.digit(lo, axis) + 1 {
            return None;
        }
        self.edge_from(lo, axis)
    }

    /// Endpoints `(v, v + e_axis)` and axis of an edge index.
    pub fn edge_endpoints(&self, edge: usize) -> Option<(usize, usize, usize)> {
        if edge >= self.edge_count() {
            return None;
        }
        let fam = self.family_size();
        let axis = edge / fam;
        let mut rank = edge % fam;
        let side = self.side();
        let two_l = side - 1;
        let mut digits = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            let radix = if a == axis { two_l } else { side };
            digits[a] = rank % radix;
            rank /= radix;
        }
        let lower = digits[..self.dim].iter().fold(0usize, |acc, &c| acc * side + c);
        let stride = side.pow((self.dim - 1 - axis) as u32);
        Some((lower, lower + stride, axis))
    }
}

/// Threshold used by the sampler: an edge is open iff its word is below it.
pub fn open_threshold(p: f64) -> u64 {
    ((p.clamp(0.0, 1.0) * 4_294_967_296.0).floor() as u64).min(1 << 32)
}

/// A finite bond configuration. Immutable once built.
#[derive(Debug, Clone)]
pub struct PercolationSample {
    spec: BoxSpec,
    p: f64,
    seed: u64,
    open: EdgeBits,
    masks: OnceLock<Vec<u16>>,
}

impl PartialEq for PercolationSample {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.p.to_bits() == other.p.to_bits()
            && self.seed == other.seed
            && self.open == other.open
    }
}

/// Draws the configuration for `(spec, p, seed)`.
pub fn sample_configuration(spec: &BoxSpec, p: f64, seed: u64) -> Result<PercolationSample, LatticeError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LatticeError::Probability(p));
    }
    let edges = spec.edge_count();
    let threshold = open_threshold(p);
    let mut bytes = vec![0u8; edges.div_ceil(8)];
    // Chunks are multiples of 8 edges so that each owns whole bytes.
    bytes.par_chunks_mut(SAMPLE_CHUNK / 8).enumerate().for_each(|(chunk, out)| {
        let start = chunk * SAMPLE_CHUNK;
        let end = (start + SAMPLE_CHUNK).min(edges);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(start as u128);
        for e in start..end {
            if (rng.next_u32() as u64) < threshold {
                let local = e - start;
                out[local / 8] |= 1 << (local % 8);
            }
        }
    });
    let mut open = EdgeBits::from_vec(bytes);
    open.truncate(edges);
    Ok(PercolationSample::from_bits(spec.clone(), p, seed, open).expect("length matches"))
}

impl PercolationSample {
    pub fn from_bits(spec: BoxSpec, p: f64, seed: u64, open: EdgeBits) -> Result<Self, LatticeError> {
        if open.len() != spec.edge_count() {
            return Err(LatticeError::BitLength { expected: spec.edge_count(), got: open.len() });
        }
        Ok(Self { spec, p, seed, open, masks: OnceLock::new() })
    }

    pub fn all_open(spec: &BoxSpec) -> Self {
        let open = bitvec![u8, Lsb0; 1; spec.edge_count()];
        Self::from_bits(spec.clone(), 1.0, 0, open).expect("length matches")
    }

    pub fn all_closed(spec: &BoxSpec) -> Self {
        let open = bitvec![u8, Lsb0; 0; spec.edge_count()];
        Self::from_bits(spec.clone(), 0.0, 0, open).expect("length matches")
    }

    /// Builds a configuration where `<u, v>` is open iff `rule(u, v)`, with
    /// `u, v` given as coordinates and `v = u + e_axis`.
    pub fn from_rule(spec: &BoxSpec, mut rule: impl FnMut(&[i64], &[i64]) -> bool) -> Self {
        let mut open = bitvec![u8, Lsb0; 0; spec.edge_count()];
        let mut a = vec![0; spec.dim()];
        let mut b = vec![0; spec.dim()];
        for e in 0..spec.edge_count() {
            let (u, v, _) = spec.edge_endpoints(e).expect("in range");
            spec.write_coords(u, &mut a);
            spec.write_coords(v, &mut b);
            if rule(&a, &b) {
                open.set(e, true);
            }
        }
        Self::from_bits(spec.clone(), 0.0, 0, open).expect("length matches")
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&self) -> &BitSlice<u8, Lsb0> {
        &self.open
    }

    pub fn is_open(&self, edge: usize) -> bool {
        self.open.get(edge).map(|b| *b).unwrap_or(false)
    }

    pub fn open_count(&self) -> usize {
        self.open.count_ones()
    }

    /// Whether the edge between two vertex indices exists and is open.
    pub fn is_open_between(&self, u: usize, v: usize) -> bool {
        self.spec.edge_between(u, v).is_some_and(|e| self.is_open(e))
    }

    /// Copy of this configuration with the given edges forced closed/open.
    pub fn with_edges(&self, close: &[usize], open: &[usize]) -> Result<Self, LatticeError> {
        let mut bits = self.open.clone();
        for &e in close.iter().chain(open) {
            if e >= bits.len() {
                return Err(LatticeError::EdgeIndex(e));
            }
        }
        for &e in close {
            bits.set(e, false);
        }
        for &e in open {
            bits.set(e, true);
        }
        Self::from_bits(self.spec.clone(), self.p, self.seed, bits)
    }

    /// Per-vertex bitmask of open incident edges: bit `2a` for `+e_a`,
    /// bit `2a + 1` for `-e_a`.
    pub fn open_masks(&self) -> &[u16] {
        self.masks.get_or_init(|| {
            let spec = &self.spec;
            let mut masks = vec![0u16; spec.vertex_count()];
            for e in self.open.iter_ones() {
                let (u, v, axis) = spec.edge_endpoints(e).expect("in range");
                masks[u] |= 1 << (2 * axis);
                masks[v] |= 1 << (2 * axis + 1);
            }
            masks
        })
    }

    /// Open neighbours of a vertex index, in increasing index order.
    pub fn open_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.open_masks()[v];
        let strides = self.spec.strides();
        let mut out: Vec<usize> = (0..self.spec.dim())
            .flat_map(|a| {
                let s = strides[a];
                let up = (mask >> (2 * a)) & 1 == 1;
                let down = (mask >> (2 * a + 1)) & 1 == 1;
                [down.then(|| v - s), up.then(|| v + s)]
            })
            .flatten()
            .collect();
        out.sort_unstable();
        out.into_iter()
    }

    /// Serializes as `magic | version u16 | d u8 | 0u8 | L u32 | offset i64*d |
    /// p f64 | seed u64 | edge bits`, little-endian, bits LSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.spec.dim() + self.open.as_raw_slice().len());
        out.extend_from_slice(SAMPLE_MAGIC);
        out.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
        out.push(self.spec.dim() as u8);
        out.push(0);
        out.extend_from_slice(&self.spec.radius().to_le_bytes());
        for &o in self.spec.offset() {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.p.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(self.open.as_raw_slice());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != SAMPLE_MAGIC {
            return Err(DecodeError::Magic);
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != SAMPLE_VERSION {
            return Err(DecodeError::Version(version));
        }
        let dim = cur.take(1)?[0] as usize;
        if cur.take(1)?[0] != 0 {
            return Err(DecodeError::Version(version));
        }
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(LatticeError::Dimension(dim).into());
        }
        let radius = u32::from_le_bytes(cur.array()?);
        let mut offset = Vec::with_capacity(dim);
        for _ in 0..dim {
            offset.push(i64::from_le_bytes(cur.array()?));
        }
        let spec = BoxSpec::with_offset(dim, radius, offset)?;
        let p = f64::from_le_bytes(cur.array()?);
        if !(0.0..=1.0).contains(&p) {
            return Err(DecodeError::Probability);
        }
        let seed = u64::from_le_bytes(cur.array()?);
        let edges = spec.edge_count();
        let payload = &bytes[cur.pos..];
        let expected = edges.div_ceil(8);
        if payload.len() != expected {
            return Err(DecodeError::PayloadLength { expected, got: payload.len() });
        }
        if edges % 8 != 0 && payload[expected - 1] >> (edges % 8) != 0 {
            return Err(DecodeError::Padding);
        }
        let mut open = EdgeBits::from_slice(payload);
        open.truncate(edges);
        Ok(Self::from_bits(spec, p, seed, open)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(DecodeError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Open-cluster decomposition of a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    /// Component id per vertex; ids are numbered by first appearance in
    /// vertex-index order.
    pub ids: Vec<u32>,
    pub sizes: Vec<usize>,
    pub largest: u32,
    /// Faces touched by each component (see [`BoxSpec::face_mask`]).
    pub faces: Vec<u32>,
    dim: usize,
}

impl ClusterLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn touches_boundary(&self, id: u32) -> bool {
        self.faces[id as usize] != 0
    }

    pub fn touches_all_faces(&self, id: u32) -> bool {
        self.faces[id as usize] == (1u32 << (2 * self.dim)) - 1
    }

    pub fn members(&self, id: u32) -> Vec<usize> {
        self.ids.iter().enumerate().filter(|(_, &c)| c == id).map(|(v, _)| v).collect()
    }
}

pub fn label_clusters(sample: &PercolationSample) -> ClusterLabeling {
    let spec = sample.spec();
    let n = spec.vertex_count();
    let mut uf = UnionFind::<usize>::new(n);
    for e in sample.bits().iter_ones() {
        let (u, v, _) = spec.edge_endpoints(e).expect("in range");
        uf.union(u, v);
    }
    let roots = uf.into_labeling();
    let mut root_to_id = vec![u32::MAX; n];
    let mut ids = vec![0u32; n];
    let mut sizes = Vec::new();
    let mut faces = Vec::new();
    for v in 0..n {
        let r = roots[v];
        if root_to_id[r] == u32::MAX {
            root_to_id[r] = sizes.len() as u32;
            sizes.push(0);
            faces.push(0);
        }
        let id = root_to_id[r];
        ids[v] = id;
        sizes[id as usize] += 1;
        faces[id as usize] |= spec.face_mask(v);
    }
    let largest = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i as u32)
        .unwrap_or(0);
    ClusterLabeling { ids, sizes, largest, faces, dim: spec.dim() }
}

/// Finite-box stand-in for the infinite cluster: the largest component that
/// touches all `2d` faces, ties broken by the smaller id.
pub fn infinite_cluster_proxy(labeling: &ClusterLabeling) -> Option<u32> {
    (0..labeling.component_count() as u32)
        .filter(|&id| labeling.touches_all_faces(id))
        .max_by(|&a, &b| labeling.sizes[a as usize].cmp(&labeling.sizes[b as usize]).then(b.cmp(&a)))
}
