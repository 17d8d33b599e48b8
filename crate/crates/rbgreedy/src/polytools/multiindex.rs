//! Multi-indices and downward closed (lower) sets.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::HashSet;

/// A multi-index `nu` in `N^d` (componentwise exponents).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex { exponents }
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex { exponents: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// `prod_j (1 + nu_j)`, the hyperbolic cross weight.
    pub fn cross_weight(&self) -> u64 {
        self.exponents.iter().map(|&e| e as u64 + 1).product()
    }

    /// The index with one unit removed in coordinate `j`, if `nu_j > 0`.
    pub fn parent(&self, j: usize) -> Option<MultiIndex> {
        if self.exponents[j] == 0 {
            return None;
        }
        let mut e = self.exponents.clone();
        e[j] -= 1;
        Some(MultiIndex { exponents: e })
    }

    /// The index with one unit added in coordinate `j`.
    pub fn child(&self, j: usize) -> MultiIndex {
        let mut e = self.exponents.clone();
        e[j] += 1;
        MultiIndex { exponents: e }
    }
}

/// True iff for every index in the set all componentwise-smaller indices are
/// also in the set. Checked one unit at a time, which suffices by induction.
pub fn is_downward_closed(indices: &[MultiIndex]) -> bool {
    let set: HashSet<&MultiIndex> = indices.iter().collect();
    indices.iter().all(|nu| {
        (0..nu.dim()).all(|j| match nu.parent(j) {
            Some(p) => set.contains(&p),
            None => true,
        })
    })
}

/// A finite downward closed subset of `N^d`. Construction validates the
/// closure property; the generators below guarantee it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownwardClosedSet {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl DownwardClosedSet {
    pub fn from_indices(dim: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("a downward closed set must contain 0"));
        }
        if indices.iter().any(|nu| nu.dim() != dim) {
            return Err(Error::invalid("mixed dimensions in index set"));
        }
        if !is_downward_closed(&indices) {
            return Err(Error::invalid("index set is not downward closed"));
        }
        let mut indices = indices;
        indices.sort();
        indices.dedup();
        Ok(DownwardClosedSet { dim, indices })
    }

    pub(crate) fn from_sorted_unchecked(dim: usize, mut indices: Vec<MultiIndex>) -> Self {
        indices.sort();
        DownwardClosedSet { dim, indices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Largest exponent appearing in coordinate `j`.
    pub fn max_degree(&self, j: usize) -> u32 {
        self.indices.iter().map(|nu| nu.exponents()[j]).max().unwrap_or(0)
    }
}

impl std::ops::Deref for DownwardClosedSet {
    type Target = [MultiIndex];
    fn deref(&self) -> &[MultiIndex] {
        &self.indices
    }
}

/// The hyperbolic cross `H_{m,d} = { nu : prod_j (1 + nu_j) <= m }`, the
/// union of all downward closed sets of cardinality `m`.
pub fn hyperbolic_cross(m: u64, d: usize) -> DownwardClosedSet {
    assert!(m >= 1 && d >= 1);
    let mut indices = Vec::new();
    let mut current = vec![0u32; d];
    // Depth-first over coordinates; `budget` is the remaining integer
    // capacity m / prod_{j' < j} (1 + nu_{j'}).
    fn recurse(j: usize, budget: u64, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if j == current.len() {
            out.push(MultiIndex::new(current.clone()));
            return;
        }
        let mut factor = 1u64;
        while factor <= budget {
            current[j] = (factor - 1) as u32;
            recurse(j + 1, budget / factor, current, out);
            factor += 1;
        }
        current[j] = 0;
    }
    recurse(0, m, &mut current, &mut indices);
    DownwardClosedSet::from_sorted_unchecked(d, indices)
}

/// Random downward closed set grown from `{0}` by uniform draws from the
/// admissible frontier (indices all of whose parents are present). Purely a
/// test-case generator; the selection algorithms never sample index sets.
pub fn random_downward_closed<R: Rng + ?Sized>(
    target_size: usize,
    d: usize,
    rng: &mut R,
) -> DownwardClosedSet {
    assert!(target_size >= 1 && d >= 1);
    let zero = MultiIndex::zero(d);
    let mut members: HashSet<MultiIndex> = HashSet::new();
    members.insert(zero.clone());
    let mut frontier: Vec<MultiIndex> = (0..d).map(|j| zero.child(j)).collect();
    let mut in_frontier: HashSet<MultiIndex> = frontier.iter().cloned().collect();

    while members.len() < target_size {
        let pick = rng.random_range(0..frontier.len());
        let nu = frontier.swap_remove(pick);
        in_frontier.remove(&nu);
        // Children of nu may have become admissible.
        for j in 0..d {
            let child = nu.child(j);
            if in_frontier.contains(&child) || members.contains(&child) {
                continue;
            }
            let admissible = (0..d).all(|i| match child.parent(i) {
                Some(p) => p == nu || members.contains(&p),
                None => true,
            });
            if admissible {
                in_frontier.insert(child.clone());
                frontier.push(child);
            }
        }
        members.insert(nu);
    }
    DownwardClosedSet::from_sorted_unchecked(d, members.into_iter().collect())
}
