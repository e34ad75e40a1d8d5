//! Counting `*`-connected lattice animals.

use std::collections::HashSet;

use super::CombinatoricsError;
use crate::geometry::{add, star_offsets};

/// Largest `d * k` accepted by [`count_lattice_animals`].
pub const MAX_ANIMAL_WORK: usize = 14;

/// Number of `*`-connected sets of `k` vertices of `Z^d` containing a fixed
/// site (the count does not depend on the site). Fixed animals are
/// enumerated with Redelmeier's method, rooted at their lexicographically
/// least cell; each has exactly `k` translates through the site.
///
/// The result is checked against `7^(dk)`.
pub fn count_lattice_animals(dim: usize, k: usize) -> Result<u64, CombinatoricsError> {
    if dim == 0 {
        return Err(CombinatoricsError::UnsupportedDimension(dim));
    }
    if dim * k > MAX_ANIMAL_WORK {
        return Err(CombinatoricsError::TooLarge(dim * k));
    }
    if k == 0 {
        return Ok(0);
    }
    let origin = vec![0i64; dim];
    let mut search = Search {
        k,
        offsets: star_offsets(dim),
        marked: HashSet::from([origin.clone()]),
        animal: Vec::new(),
        count: 0,
    };
    search.extend(vec![origin]);
    let total = search.count * k as u64;
    let bound = 7u64.pow((dim * k) as u32);
    if total > bound {
        return Err(CombinatoricsError::Verification(format!("{total} animals exceed 7^(dk) = {bound}")));
    }
    Ok(total)
}

struct Search {
    k: usize,
    offsets: Vec<Vec<i64>>,
    marked: HashSet<Vec<i64>>,
    animal: Vec<Vec<i64>>,
    count: u64,
}

impl Search {
    fn extend(&mut self, mut untried: Vec<Vec<i64>>) {
        while let Some(cell) = untried.pop() {
            self.animal.push(cell.clone());
            if self.animal.len() == self.k {
                self.count += 1;
            } else {
                let mut fresh = Vec::new();
                for o in &self.offsets {
                    let q = add(&cell, o);
                    // Only cells after the root in lexicographic order.
                    if q.as_slice() > vec![0i64; q.len()].as_slice() && self.marked.insert(q.clone()) {
                        fresh.push(q);
                    }
                }
                let mut next = untried.clone();
                next.extend(fresh.iter().cloned());
                self.extend(next);
                for q in &fresh {
                    self.marked.remove(q);
                }
            }
            self.animal.pop();
        }
    }
}
