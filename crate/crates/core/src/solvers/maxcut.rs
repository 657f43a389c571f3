//! Weighted MaxCut by exhaustive enumeration, with the Ising mapping.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::operator::{Pauli, PauliString, PauliSum};

/// Largest vertex count enumerated exhaustively.
pub const MAXCUT_VERTEX_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, SolverError> {
        let mut seen = HashSet::new();
        for &(u, v, w) in &edges {
            let bad = |reason: String| SolverError::InvalidParameter { name: "E", reason };
            if u >= n_vertices || v >= n_vertices {
                return Err(bad(format!("edge ({u}, {v}) has a vertex >= N = {n_vertices}")));
            }
            if u == v {
                return Err(bad(format!("self loop on vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(bad(format!("duplicate edge ({u}, {v})")));
            }
            if !w.is_finite() {
                return Err(bad(format!("non-finite weight on edge ({u}, {v})")));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Weight of edges crossing the bipartition given by the bits of `sides`.
    pub fn cut_value(&self, sides: u64) -> f64 {
        self.edges
            .iter()
            .filter(|(u, v, _)| ((sides >> u) ^ (sides >> v)) & 1 == 1)
            .map(|e| e.2)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub value: f64,
    /// `partition[v]` is true for vertices on the second side.
    pub partition: Vec<bool>,
}

pub fn maxcut_bruteforce(g: &WeightedGraph) -> Result<Cut, SolverError> {
    let n = g.n_vertices;
    if n > MAXCUT_VERTEX_CAP {
        return Err(SolverError::CapExceeded { size: n, cap: MAXCUT_VERTEX_CAP });
    }
    // A cut and its complement have equal weight, so the last vertex stays on side 0.
    let count = if n == 0 { 1u64 } else { 1u64 << (n - 1) };
    let mut best = (f64::NEG_INFINITY, 0u64);
    for sides in 0..count {
        let value = g.cut_value(sides);
        if value > best.0 {
            best = (value, sides);
        }
    }
    Ok(Cut { value: best.0, partition: (0..n).map(|v| (best.1 >> v) & 1 == 1).collect() })
}

/// `H = sum_{(u,v,w)} w Z_u Z_v`, whose ground energy `E0` gives the cut `(W - E0) / 2`.
pub fn ising_hamiltonian(g: &WeightedGraph) -> Result<PauliSum, SolverError> {
    let mut terms = Vec::with_capacity(g.edges.len());
    for &(u, v, w) in &g.edges {
        terms.push((Complex64::new(w, 0.0), PauliString::from_sparse(g.n_vertices, &[(u, Pauli::Z), (v, Pauli::Z)])?));
    }
    Ok(PauliSum::from_terms(g.n_vertices, terms)?)
}

/// Maximum cut through the diagonal of the Ising Hamiltonian.
pub fn maxcut_from_ising(g: &WeightedGraph) -> Result<f64, SolverError> {
    if g.n_vertices > MAXCUT_VERTEX_CAP {
        return Err(SolverError::CapExceeded { size: g.n_vertices, cap: MAXCUT_VERTEX_CAP });
    }
    let e0 = ising_hamiltonian(g)?.diagonal().iter().map(|d| d.re).fold(f64::INFINITY, f64::min);
    Ok((g.total_weight() - e0) / 2.0)
}
