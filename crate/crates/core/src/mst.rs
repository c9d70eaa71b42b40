//! Exact Euclidean minimum spanning trees and the α-weighted 0-persistence
//! lifetime sum.
//!
//! The 0-dimensional persistence pairs of a Vietoris–Rips filtration are in
//! bijection with the edges of the Euclidean MST: every point is born at 0 and
//! a component dies exactly when an MST edge of that length merges it. The
//! lifetime sum is therefore a sum over MST edge lengths.

use std::cmp::Ordering;

use crate::cloud::{squared_distance, TokenEmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    /// Smaller endpoint index.
    pub i: usize,
    /// Larger endpoint index.
    pub j: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstResult {
    /// Edges in the order Prim's algorithm attached them.
    pub edges: Vec<MstEdge>,
    pub total_weight: f64,
}

impl MstResult {
    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.length)
    }
}

/// Candidate edge ordered by (squared length, smaller index, larger index).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    sq: f64,
    lo: usize,
    hi: usize,
}

impl Candidate {
    fn new(sq: f64, a: usize, b: usize) -> Self {
        Candidate { sq, lo: a.min(b), hi: a.max(b) }
    }

    fn precedes(&self, other: &Candidate) -> bool {
        match self.sq.total_cmp(&other.sq) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.lo, self.hi) < (other.lo, other.hi),
        }
    }
}

/// Dense Prim over implicit pairwise distances.
///
/// O(n²·d) time and O(n) extra memory; no distance matrix is stored. Among
/// equal-length candidates the lexicographically smallest `(i, j)` edge wins,
/// which makes the tree unique for a given cloud.
pub fn compute_mst(cloud: &TokenEmbeddingMatrix) -> MstResult {
    let n = cloud.n();
    if n < 2 {
        return MstResult { edges: Vec::new(), total_weight: 0.0 };
    }

    // Vertices not yet in the tree, each with its cheapest edge into the tree.
    let mut outside: Vec<(usize, Candidate)> = Vec::with_capacity(n - 1);
    let root = cloud.row(0);
    for k in 1..n {
        outside.push((k, Candidate::new(squared_distance(root, cloud.row(k)), 0, k)));
    }

    let mut edges = Vec::with_capacity(n - 1);
    let mut total_weight = 0.0;
    let mut next = argmin(&outside);
    while !outside.is_empty() {
        let (v, chosen) = outside.swap_remove(next);
        let length = chosen.sq.sqrt();
        total_weight += length;
        edges.push(MstEdge { i: chosen.lo, j: chosen.hi, length });

        let vrow = cloud.row(v);
        next = 0;
        for slot in 0..outside.len() {
            let (k, best) = &mut outside[slot];
            let cand = Candidate::new(squared_distance(vrow, cloud.row(*k)), v, *k);
            if cand.precedes(best) {
                *best = cand;
            }
            if slot > 0 && outside[slot].1.precedes(&outside[next].1) {
                next = slot;
            }
        }
    }

    MstResult { edges, total_weight }
}

fn argmin(outside: &[(usize, Candidate)]) -> usize {
    let mut best = 0;
    for slot in 1..outside.len() {
        if outside[slot].1.precedes(&outside[best].1) {
            best = slot;
        }
    }
    best
}

/// `Σ |e|^alpha` over the tree edges. Zero-length edges contribute nothing.
///
/// Panics unless `alpha > 0`.
pub fn lifetime_sum(mst: &MstResult, alpha: f64) -> f64 {
    assert!(alpha > 0.0, "alpha must be positive, got {alpha}");
    if alpha == 1.0 {
        return mst.lengths().sum();
    }
    mst.lengths().filter(|&l| l > 0.0).map(|l| l.powf(alpha)).sum()
}
