use ndarray::Array2;

use crate::diffusion::uniform_left_stochastic;
use crate::models::sq_dist;
use crate::network::Topology;

/// `H`, `G` and the split of `G` into the weights applied to neighbor
/// aggregates (`a_dot`) and to neighbor desired estimates (`a_ddot`).
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredMatrices {
    pub h: Array2<u8>,
    pub g: Array2<f64>,
    pub a_dot: Array2<f64>,
    pub a_ddot: Array2<f64>,
}

impl DesiredMatrices {
    /// `H = G = A_dot = I`, `A_ddot = 0`.
    pub fn identity(n: usize) -> Self {
        Self {
            h: Array2::eye(n),
            g: Array2::eye(n),
            a_dot: Array2::eye(n),
            a_ddot: Array2::zeros((n, n)),
        }
    }
}

/// Sends each `g_{lk}` on a link to `a_dot` when `to_aggregate(l, k)` holds and
/// to `a_ddot` otherwise.
pub fn split_weights(
    g: &Array2<f64>,
    topology: &Topology,
    mut to_aggregate: impl FnMut(usize, usize) -> bool,
) -> (Array2<f64>, Array2<f64>) {
    let n = topology.n_agents();
    let mut a_dot = Array2::zeros((n, n));
    let mut a_ddot = Array2::zeros((n, n));
    for k in 0..n {
        for &l in topology.neighbors(k) {
            let weight = g[[l, k]];
            if weight == 0.0 {
                continue;
            }
            if to_aggregate(l, k) {
                a_dot[[l, k]] = weight;
            } else {
                a_ddot[[l, k]] = weight;
            }
        }
    }
    (a_dot, a_ddot)
}

/// Builds `H` from `beta`-tests between the post-switch desired estimates of
/// linked agents, `G` uniform over `H`, and splits `G` by whether neighbor
/// `l`'s intermediate iterate is `beta`-close to `k`'s desired estimate.
pub fn update_desired_matrices(
    w_switched: &Array2<f64>,
    psi: &Array2<f64>,
    topology: &Topology,
    beta: f64,
) -> DesiredMatrices {
    let n = topology.n_agents();
    let mut h = Array2::<u8>::zeros((n, n));
    for k in 0..n {
        for &l in topology.neighbors(k) {
            h[[l, k]] = u8::from(sq_dist(w_switched.row(k), w_switched.row(l)) <= beta);
        }
    }
    let g = uniform_left_stochastic(&h, topology);
    let (a_dot, a_ddot) = split_weights(&g, topology, |l, k| {
        sq_dist(w_switched.row(k), psi.row(l)) <= beta
    });
    DesiredMatrices { h, g, a_dot, a_ddot }
}

/// `w_k = sum_l a_dot_{lk} phi_l + sum_l a_ddot_{lk} w_{l,prev}`.
pub fn update_estimate(
    w_prev: &Array2<f64>,
    phi: &Array2<f64>,
    a_dot: &Array2<f64>,
    a_ddot: &Array2<f64>,
    topology: &Topology,
) -> Array2<f64> {
    let mut w = Array2::zeros(w_prev.raw_dim());
    for k in 0..w.nrows() {
        let mut out = w.row_mut(k);
        for &l in topology.neighbors(k) {
            let (da, dda) = (a_dot[[l, k]], a_ddot[[l, k]]);
            if da != 0.0 {
                out.scaled_add(da, &phi.row(l));
            }
            if dda != 0.0 {
                out.scaled_add(dda, &w_prev.row(l));
            }
        }
    }
    w
}
