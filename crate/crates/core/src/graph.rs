//! Undirected communication topology for the observer network: adjacency,
//! degree and Laplacian construction for the consensus coupling term.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

/// Errors raised while constructing a communication graph.
#[derive(Debug, Error)]
pub enum GraphError {
    /// An edge references a node outside `0..node_count`.
    #[error("edge ({0}, {1}) references a node outside the graph")]
    EdgeOutOfRange(usize, usize),
    /// An edge connects a node to itself.
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
}

/// Undirected, unweighted communication graph over `node_count` observer
/// nodes. Edges are stored as ordered pairs `(min, max)` with 0-based node
/// indices; duplicates collapse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommGraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl CommGraph {
    /// Builds a graph from 0-based node pairs, rejecting self-loops and
    /// out-of-range endpoints. Duplicate and mirrored edges are merged.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if i >= node_count || j >= node_count {
                return Err(GraphError::EdgeOutOfRange(i, j));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(CommGraph {
            node_count,
            edges: set,
        })
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Iterator over the normalized edge set.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn adjacency(&self) -> Matrix {
        let m = self.node_count;
        let mut a = Matrix::zeros(m, m);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Graph Laplacian `L = D - A`; symmetric positive semidefinite with
    /// exactly zero row sums (assembled from integer degree counts).
    pub fn laplacian(&self) -> Matrix {
        let m = self.node_count;
        let mut l = Matrix::zeros(m, m);
        for &(i, j) in &self.edges {
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
        }
        l
    }

    /// Partition of the nodes into maximal connected components, each sorted
    /// ascending, ordered by smallest member. Informational only: the gain
    /// designs never require connectivity.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let m = self.node_count;
        let mut neighbor: Vec<Vec<usize>> = vec![Vec::new(); m];
        for &(i, j) in &self.edges {
            neighbor[i].push(j);
            neighbor[j].push(i);
        }
        let mut seen = vec![false; m];
        let mut components = Vec::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &neighbor[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Convenience constructor for a ring over `m` nodes.
    pub fn ring(m: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..m).map(|i| (i, (i + 1) % m)).collect();
        CommGraph::new(m, &edges).expect("ring edges are always valid")
    }
}
