//! Following the observed model of one designated agent.
//!
//! The designated agent's intermediate iterate is relayed hop by hop as an
//! anchor vector. Each agent remembers which neighbor it refreshes its anchor
//! from; once it has a source it cooperates with other sourced agents and
//! weighs neighbor aggregates by how close their iterates are to the anchor.

use ndarray::Array2;

use crate::config::ExperimentConfig;
use crate::decision::{split_weights, DesiredMatrices};
use crate::diffusion::uniform_left_stochastic;
use crate::error::Result;
use crate::models::{sq_dist, ModelSet};
use crate::network::Topology;
use crate::record::RunRecord;
use crate::sim::{NoObserver, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorState {
    /// Relayed copies of the target's iterate, one row per agent.
    pub anchor: Array2<f64>,
    /// Neighbor each agent refreshes its anchor from; `None` until reached.
    pub source: Vec<Option<usize>>,
    pub target: usize,
    /// Number of times each agent's source changed.
    pub source_changes: Vec<u32>,
}

impl AnchorState {
    pub fn new(n: usize, m: usize, target: usize) -> Self {
        assert!(target < n, "target agent out of range");
        Self {
            anchor: Array2::zeros((n, m)),
            source: vec![None; n],
            target,
            source_changes: vec![0; n],
        }
    }

    /// Agents that have an anchor source.
    pub fn coverage(&self) -> usize {
        self.source.iter().filter(|s| s.is_some()).count()
    }

    /// Sources in the one-based external encoding, `0` meaning none.
    pub fn source_indices(&self) -> Vec<usize> {
        self.source.iter().map(|s| s.map_or(0, |l| l + 1)).collect()
    }

    /// One relay round. Reads only the previous round's anchors and sources.
    ///
    /// Neighbors of the target copy its current iterate. Unsourced agents take
    /// the previous anchor of their lowest-index sourced neighbor and adopt it
    /// as source. Sourced agents refresh from their source while it is still a
    /// neighbor and otherwise keep their anchor.
    pub fn spread(&mut self, psi: &Array2<f64>, topology: &Topology) {
        let prev_anchor = self.anchor.clone();
        let prev_source = self.source.clone();
        let m = self.target;
        for k in 0..topology.n_agents() {
            let next = if topology.is_linked(m, k) {
                self.anchor.row_mut(k).assign(&psi.row(m));
                Some(m)
            } else if prev_source[k].is_none() {
                let relay = topology
                    .neighbors(k)
                    .iter()
                    .copied()
                    .find(|&l| prev_source[l].is_some());
                if let Some(l) = relay {
                    self.anchor.row_mut(k).assign(&prev_anchor.row(l));
                }
                relay
            } else {
                if let Some(l) = prev_source[k].filter(|&l| topology.is_linked(l, k)) {
                    self.anchor.row_mut(k).assign(&prev_anchor.row(l));
                }
                prev_source[k]
            };
            if next != prev_source[k] {
                self.source_changes[k] += 1;
            }
            self.source[k] = next;
        }
    }
}

/// `H` over pairs of linked, sourced agents (unsourced agents keep only their
/// self-entry), `G` uniform over `H`, and a split sending `g_{lk}` to the
/// aggregate weights when `l`'s iterate is `beta`-close to `k`'s anchor.
///
/// Unsourced agents put their whole weight on their own previous estimate.
pub fn update_follow_matrices(
    state: &AnchorState,
    psi: &Array2<f64>,
    topology: &Topology,
    beta: f64,
) -> DesiredMatrices {
    let n = topology.n_agents();
    let mut h = Array2::<u8>::zeros((n, n));
    for k in 0..n {
        if state.source[k].is_none() {
            h[[k, k]] = 1;
            continue;
        }
        for &l in topology.neighbors(k) {
            h[[l, k]] = u8::from(state.source[l].is_some());
        }
    }
    let g = uniform_left_stochastic(&h, topology);
    let (a_dot, a_ddot) = split_weights(&g, topology, |l, k| {
        state.source[k].is_some() && sq_dist(state.anchor.row(k), psi.row(l)) <= beta
    });
    DesiredMatrices { h, g, a_dot, a_ddot }
}

/// Runs the follow loop with designated agent `target` (zero-based).
pub fn run_algorithm2(
    config: &ExperimentConfig,
    models: &ModelSet,
    topology: &Topology,
    target: usize,
    seed: u64,
) -> Result<RunRecord> {
    let mut sim = Simulation::follow(config, topology.clone(), models.clone(), target, seed)?;
    sim.run(&mut NoObserver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::column_sum_error;
    use ndarray::array;

    #[test]
    fn chain_walkthrough() {
        // m - l - k as agents 0 - 1 - 2
        let t = Topology::chain(3);
        let mut s = AnchorState::new(3, 2, 0);
        let psi1 = array![[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        s.spread(&psi1, &t);
        assert_eq!(s.anchor.row(1), psi1.row(0));
        assert_eq!(s.source, vec![Some(0), Some(0), None]);
        assert_eq!(s.anchor.row(2), array![0.0, 0.0]);

        let psi2 = array![[2.0, 2.0], [0.0, 0.0], [0.0, 0.0]];
        s.spread(&psi2, &t);
        assert_eq!(s.anchor.row(2), array![1.0, 1.0]);
        assert_eq!(s.source[2], Some(1));
        assert_eq!(s.anchor.row(1), psi2.row(0));
        assert_eq!(s.source_indices(), vec![1, 1, 2]);
    }

    #[test]
    fn target_anchors_itself() {
        let t = Topology::chain(2);
        let mut s = AnchorState::new(2, 2, 1);
        for i in 0..5 {
            let psi = array![[0.0, 0.0], [i as f64, -(i as f64)]];
            s.spread(&psi, &t);
            assert_eq!(s.anchor.row(1), psi.row(1));
            assert_eq!(s.source[1], Some(1));
        }
    }

    #[test]
    fn unsourced_column_keeps_self() {
        let t = Topology::chain(3);
        let mut s = AnchorState::new(3, 2, 0);
        let psi = array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]];
        s.spread(&psi, &t);
        let d = update_follow_matrices(&s, &psi, &t, 0.08);
        assert_eq!(d.h.column(2).to_vec(), vec![0, 0, 1]);
        assert_eq!(d.a_ddot[[2, 2]], 1.0);
        assert_eq!(d.a_dot.column(2).sum(), 0.0);
        // sourced agents observing the target's model: no ddot weight
        assert_eq!(d.a_ddot.column(0).sum(), 0.0);
        assert_eq!(d.a_ddot.column(1).sum(), 0.0);
        assert!(column_sum_error(&(&d.a_dot + &d.a_ddot), 0..3) < 1e-12);
    }

    #[test]
    fn coverage_grows_with_bfs_depth() {
        let t = Topology::chain(6);
        let mut s = AnchorState::new(6, 1, 2);
        let depths = t.bfs_depths(2);
        let psi = Array2::zeros((6, 1));
        for round in 1..=4 {
            s.spread(&psi, &t);
            for k in 0..6 {
                assert_eq!(s.source[k].is_some(), depths[k].unwrap() <= round, "round {round} agent {k}");
            }
        }
    }
}
