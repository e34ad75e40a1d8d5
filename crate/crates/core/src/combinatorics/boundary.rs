//! Exterior vertex boundary of a finite connected set.

use std::collections::{HashSet, VecDeque};

use super::{Check, CombinatoricsError, PointSet};
use crate::geometry::{add, star_offsets, unit_offsets, Rect};

/// Default isoperimetric constant. The edge isoperimetric inequality gives
/// `|E(F, F^c)| >= 2d |F|^((d-1)/d)`, and each exterior vertex absorbs at
/// most `2d` of those edges, so 1 already suffices.
pub const DEFAULT_KAPPA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorBoundary {
    pub dim: usize,
    /// Vertices outside `Γ` with a neighbour in `Γ` and a path to the
    /// ambient box faces avoiding `Γ`.
    pub boundary: Vec<Vec<i64>>,
    /// Vertices outside `Γ` cut off from the box faces.
    pub interior: Vec<Vec<i64>>,
    pub star_connected: bool,
}

impl ExteriorBoundary {
    /// `|Γ| <= kappa |∂ext Γ|^(d/(d-1))`.
    pub fn isoperimetry(&self, gamma_size: usize, kappa: f64) -> Check {
        let d = self.dim as f64;
        let bound = kappa * (self.boundary.len() as f64).powf(d / (d - 1.0));
        Check { bound, achieved: gamma_size as f64, pass: gamma_size as f64 <= bound }
    }
}

/// Whether `points` form one component under `l_inf`-adjacency.
pub fn is_star_connected(points: &[Vec<i64>]) -> bool {
    let Some(first) = points.first() else { return true };
    let set: HashSet<&[i64]> = points.iter().map(|p| p.as_slice()).collect();
    let offsets = star_offsets(first.len());
    let mut seen: HashSet<Vec<i64>> = HashSet::from([first.clone()]);
    let mut queue = VecDeque::from([first.clone()]);
    while let Some(p) = queue.pop_front() {
        for o in &offsets {
            let q = add(&p, o);
            if set.contains(q.as_slice()) && !seen.contains(&q) {
                seen.insert(q.clone());
                queue.push_back(q);
            }
        }
    }
    seen.len() == set.len()
}

/// Exterior boundary of `gamma` inside `ambient`, whose faces stand in for
/// infinity. `gamma` must stay off the faces.
pub fn exterior_boundary(gamma: &PointSet, ambient: &Rect) -> Result<ExteriorBoundary, CombinatoricsError> {
    let d = gamma.dim();
    if d < 2 || ambient.dim() != d {
        return Err(CombinatoricsError::Dimension);
    }
    if gamma.is_empty() {
        return Err(CombinatoricsError::Empty);
    }
    if gamma.points().iter().any(|p| !ambient.contains(p) || ambient.on_face(p)) {
        return Err(CombinatoricsError::Hypothesis("set touches the ambient box faces".into()));
    }
    let size = ambient.len();
    let mut blocked = vec![false; size];
    for p in gamma.points() {
        blocked[ambient.local_index(p).expect("inside")] = true;
    }
    let mut outside = vec![false; size];
    let mut queue = VecDeque::new();
    for (idx, p) in ambient.points().enumerate() {
        if ambient.on_face(&p) {
            outside[idx] = true;
            queue.push_back(p);
        }
    }
    let units = unit_offsets(d);
    while let Some(p) = queue.pop_front() {
        for o in &units {
            let q = add(&p, o);
            if let Some(qi) = ambient.local_index(&q) {
                if !blocked[qi] && !outside[qi] {
                    outside[qi] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for (idx, p) in ambient.points().enumerate() {
        if blocked[idx] {
            continue;
        }
        if !outside[idx] {
            interior.push(p);
        } else if units.iter().any(|o| ambient.local_index(&add(&p, o)).is_some_and(|qi| blocked[qi])) {
            boundary.push(p);
        }
    }
    let star_connected = is_star_connected(&boundary);
    Ok(ExteriorBoundary { dim: d, boundary, interior, star_connected })
}
