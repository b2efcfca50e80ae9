//! Moving agents.
//!
//! Models double as 2-D source locations. Every round each agent steers
//! toward its desired estimate `w_k`, aligns with its neighbors and holds a
//! set distance to the agents it is linked to; the communication graph is
//! then rebuilt from the new positions.
//!
//! The motion law is a plain flocking rule:
//!
//! ```text
//! v_k = max_speed * (g_g * goal + g_a * align + g_s * space) / (sum of active g)
//! ```
//!
//! clipped to `max_speed`, where `goal` is the offset to the target clipped to
//! unit length, `align` the mean neighbor velocity over `max_speed`, and
//! `space` the clipped sum of springs `(x_l - x_k)(1 - spacing / d_lk)` over
//! linked neighbors. The spring pushes apart inside `spacing` and pulls
//! together beyond it. Without the pull, groups heading for different sources
//! drift out of range before they can agree; without the push, a tight swarm
//! under the degree cap links up as isolated cliques.

use ndarray::Array2;
use rand::Rng;

use crate::config::MotionParams;
use crate::error::{Error, Result};
use crate::network::{Topology, MAX_TOPOLOGY_ATTEMPTS};

#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
}

impl MotionState {
    /// Agents at rest at `positions`.
    pub fn at_rest(positions: Vec<[f64; 2]>) -> Self {
        let n = positions.len();
        Self {
            positions,
            velocities: vec![[0.0; 2]; n],
        }
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.velocities.iter().map(|v| norm(*v))
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn clip(v: [f64; 2], cap: f64) -> [f64; 2] {
    let n = norm(v);
    if n > cap {
        [v[0] * cap / n, v[1] * cap / n]
    } else {
        v
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Moves every agent one step toward the 2-D target in the matching row of
/// `targets`. Returns the largest speed applied.
pub fn step_motion(
    ms: &mut MotionState,
    targets: &Array2<f64>,
    topology: &Topology,
    params: &MotionParams,
) -> f64 {
    let n = ms.positions.len();
    assert_eq!(targets.nrows(), n);
    assert!(targets.ncols() >= 2, "targets must be 2-D");
    let pos = &ms.positions;
    let vel = &ms.velocities;
    let mut next = vec![[0.0; 2]; n];
    for k in 0..n {
        let p = pos[k];
        let goal = clip([targets[[k, 0]] - p[0], targets[[k, 1]] - p[1]], 1.0);
        let mut sum = [params.gamma_goal * goal[0], params.gamma_goal * goal[1]];
        let mut weight = params.gamma_goal;

        let others: Vec<usize> = topology
            .neighbors(k)
            .iter()
            .copied()
            .filter(|&l| l != k)
            .collect();
        if !others.is_empty() && params.gamma_align > 0.0 {
            let mut mean = [0.0; 2];
            for &l in &others {
                mean[0] += vel[l][0];
                mean[1] += vel[l][1];
            }
            let s = params.max_speed * others.len() as f64;
            sum[0] += params.gamma_align * mean[0] / s;
            sum[1] += params.gamma_align * mean[1] / s;
            weight += params.gamma_align;
        }

        if !others.is_empty() && params.gamma_spacing > 0.0 {
            let mut space = [0.0; 2];
            for &l in &others {
                let q = pos[l];
                let d = dist2(p, q).sqrt();
                if d == 0.0 {
                    continue;
                }
                let pull = 1.0 - params.spacing / d;
                space[0] += pull * (q[0] - p[0]);
                space[1] += pull * (q[1] - p[1]);
            }
            let space = clip(space, 1.0);
            sum[0] += params.gamma_spacing * space[0];
            sum[1] += params.gamma_spacing * space[1];
            weight += params.gamma_spacing;
        }

        next[k] = if weight > 0.0 {
            clip(
                [params.max_speed * sum[0] / weight, params.max_speed * sum[1] / weight],
                params.max_speed,
            )
        } else {
            [0.0; 2]
        };
    }
    let mut peak = 0.0f64;
    for (k, v) in next.into_iter().enumerate() {
        ms.positions[k][0] += v[0];
        ms.positions[k][1] += v[1];
        ms.velocities[k] = v;
        peak = peak.max(norm(v));
    }
    peak
}

/// Radius graph on `positions` under a closed-degree cap.
///
/// Candidate links are visited shortest first (ties by agent indices) and
/// kept while both ends still have room, so the result may be disconnected.
pub fn rebuild_topology(positions: &[[f64; 2]], comm_radius: f64, max_degree: usize) -> Topology {
    let n = positions.len();
    let r2 = comm_radius * comm_radius;
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let d2 = dist2(positions[a], positions[b]);
            if d2 <= r2 {
                candidates.push((d2, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut degree = vec![1usize; n];
    let mut edges = Vec::new();
    for (_, a, b) in candidates {
        if degree[a] < max_degree && degree[b] < max_degree {
            degree[a] += 1;
            degree[b] += 1;
            edges.push((a, b));
        }
    }
    Topology::from_edges(n, &edges, positions.to_vec())
}

/// Uniform positions in the square of side `spawn_extent` centred on the
/// origin, redrawn until the capped radius graph is connected.
pub fn spawn<R: Rng + ?Sized>(
    n: usize,
    params: &MotionParams,
    max_degree: usize,
    rng: &mut R,
) -> Result<Topology> {
    let half = 0.5 * params.spawn_extent;
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-half..=half), rng.random_range(-half..=half)])
            .collect();
        let topo = rebuild_topology(&positions, params.comm_radius, max_degree);
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(Error::InfeasibleTopology {
        n_agents: n,
        max_degree,
        radius: params.comm_radius,
        attempts: MAX_TOPOLOGY_ATTEMPTS,
    })
}

/// Iterations at which agent positions are kept for the trajectory file.
pub fn is_snapshot(iter: usize, max_iters: usize, every: usize) -> bool {
    matches!(iter, 1 | 200 | 500 | 1000) || iter == max_iters || (every > 0 && iter % every == 0)
}
