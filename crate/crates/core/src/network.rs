//! Communication topologies.
//!
//! A [`Topology`] is an undirected graph with self-loops: every agent is its own
//! neighbor, so the closed neighborhood `N_k` contains `k` and `n_k = |N_k|`.
//! Degree caps are expressed in closed-neighborhood terms throughout.

use std::collections::VecDeque;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Attempts made by [`generate_topology`] before declaring the geometry infeasible.
pub const MAX_TOPOLOGY_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Array2<u8>,
    neighbors: Vec<Vec<usize>>,
    positions: Vec<[f64; 2]>,
}

impl Topology {
    /// Builds a topology from undirected edges. Self-loops are added; duplicate
    /// and reflexive edges are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], positions: Vec<[f64; 2]>) -> Self {
        assert_eq!(positions.len(), n, "one position per agent");
        let mut adjacency = Array2::<u8>::zeros((n, n));
        for k in 0..n {
            adjacency[[k, k]] = 1;
        }
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range");
            adjacency[[a, b]] = 1;
            adjacency[[b, a]] = 1;
        }
        Self::from_adjacency(adjacency, positions)
    }

    fn from_adjacency(adjacency: Array2<u8>, positions: Vec<[f64; 2]>) -> Self {
        let n = adjacency.nrows();
        let neighbors = (0..n)
            .map(|k| (0..n).filter(|&l| adjacency[[l, k]] == 1).collect())
            .collect();
        Self {
            adjacency,
            neighbors,
            positions,
        }
    }

    /// Agents on a line `0 - 1 - ... - (n-1)`, spaced one unit apart.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        let positions = (0..n).map(|k| [k as f64, 0.0]).collect();
        Self::from_edges(n, &edges, positions)
    }

    pub fn n_agents(&self) -> usize {
        self.neighbors.len()
    }

    /// Closed neighborhood of `k`, ascending, including `k`.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// `n_k`, the closed-neighborhood size.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_agents()).map(|k| self.degree(k)).max().unwrap_or(0)
    }

    pub fn is_linked(&self, l: usize, k: usize) -> bool {
        self.adjacency[[l, k]] == 1
    }

    /// The binary matrix `e_{lk}` with unit diagonal.
    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_agents();
        let mut out = Vec::new();
        for a in 0..n {
            for &b in &self.neighbors[a] {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Hop distance from `source` to every agent, `None` when unreachable.
    pub fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.n_agents()];
        let mut queue = VecDeque::new();
        depth[source] = Some(0);
        queue.push_back(source);
        while let Some(k) = queue.pop_front() {
            let d = depth[k].unwrap_or(0);
            for &l in &self.neighbors[k] {
                if depth[l].is_none() {
                    depth[l] = Some(d + 1);
                    queue.push_back(l);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.n_agents() == 0 || self.bfs_depths(0).iter().all(Option::is_some)
    }

    /// Largest eccentricity; `None` for disconnected graphs.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for k in 0..self.n_agents() {
            for d in self.bfs_depths(k) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Parameters of the static random geometric generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub n_agents: usize,
    /// Cap on the closed neighborhood size `n_k`.
    pub max_degree: usize,
    /// Link distance on the unit square.
    pub radius: f64,
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Random geometric graph on the unit square, pruned to the degree cap.
///
/// Positions are uniform; agents closer than `radius` are linked. Agents whose
/// closed neighborhood exceeds `max_degree` then lose their longest links, one
/// at a time, provided the graph stays connected. The whole draw is repeated
/// (up to [`MAX_TOPOLOGY_ATTEMPTS`]) when the graph is disconnected or an
/// agent cannot be brought under the cap.
pub fn generate_topology(params: &TopologyParams, seed: u64) -> Result<Topology> {
    let TopologyParams {
        n_agents: n,
        max_degree,
        radius,
    } = *params;
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 agents, got {n}")));
    }
    if max_degree < 2 {
        return Err(Error::Config(format!(
            "max_degree counts the agent itself and must be at least 2, got {max_degree}"
        )));
    }
    let infeasible = |attempts| Error::InfeasibleTopology {
        n_agents: n,
        max_degree,
        radius,
        attempts,
    };
    // A connected graph on three or more vertices has a vertex with two
    // distinct neighbors, i.e. a closed neighborhood of at least 3.
    if max_degree == 2 && n > 2 {
        return Err(infeasible(0));
    }

    let mut rng = rng::rng_for(seed, rng::TOPOLOGY);
    let r2 = radius * radius;
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mut adj = Array2::<u8>::eye(n);
        for a in 0..n {
            for b in (a + 1)..n {
                if sq_dist(positions[a], positions[b]) <= r2 {
                    adj[[a, b]] = 1;
                    adj[[b, a]] = 1;
                }
            }
        }
        if !connected(&adj) {
            continue;
        }
        if prune_to_cap(&mut adj, &positions, max_degree) {
            return Ok(Topology::from_adjacency(adj, positions));
        }
    }
    Err(infeasible(MAX_TOPOLOGY_ATTEMPTS))
}

fn closed_degree(adj: &Array2<u8>, k: usize) -> usize {
    adj.column(k).iter().filter(|&&e| e == 1).count()
}

fn connected(adj: &Array2<u8>) -> bool {
    let n = adj.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for l in 0..n {
            if adj[[l, k]] == 1 && !seen[l] {
                seen[l] = true;
                stack.push(l);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn prune_to_cap(adj: &mut Array2<u8>, positions: &[[f64; 2]], cap: usize) -> bool {
    let n = adj.nrows();
    loop {
        let Some(k) = (0..n)
            .filter(|&k| closed_degree(adj, k) > cap)
            .max_by_key(|&k| (closed_degree(adj, k), std::cmp::Reverse(k)))
        else {
            return true;
        };
        // Prefer links whose other end is also over the cap, then the longest.
        let mut candidates: Vec<usize> = (0..n).filter(|&l| l != k && adj[[l, k]] == 1).collect();
        candidates.sort_by(|&a, &b| {
            let over_a = closed_degree(adj, a) > cap;
            let over_b = closed_degree(adj, b) > cap;
            over_b.cmp(&over_a).then_with(|| {
                sq_dist(positions[k], positions[b]).total_cmp(&sq_dist(positions[k], positions[a]))
            })
        });
        let mut removed = false;
        for l in candidates {
            adj[[l, k]] = 0;
            adj[[k, l]] = 0;
            if connected(adj) {
                removed = true;
                break;
            }
            adj[[l, k]] = 1;
            adj[[k, l]] = 1;
        }
        if !removed {
            return false;
        }
    }
}
