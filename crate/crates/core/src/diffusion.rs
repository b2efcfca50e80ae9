//! Adapt-then-combine diffusion with learned clustering.
//!
//! Each round every agent takes one LMS step on fresh data, decides which
//! neighbors observe its own model by comparing their intermediate iterates
//! against its previous aggregate, and averages over that believed cluster.

use ndarray::{Array2, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::models::{sq_dist, DataSample};
use crate::network::Topology;

/// Iterates of the adaptation and aggregation steps, one row per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub psi: Array2<f64>,
    pub phi: Array2<f64>,
    pub phi_prev: Array2<f64>,
    pub step_sizes: Vec<f64>,
}

impl DiffusionState {
    /// Zero iterates for `n` agents of dimension `m`.
    pub fn new(n: usize, m: usize, step_sizes: Vec<f64>) -> Self {
        assert_eq!(step_sizes.len(), n);
        assert!(step_sizes.iter().all(|&mu| mu > 0.0), "step sizes must be positive");
        Self {
            psi: Array2::zeros((n, m)),
            phi: Array2::zeros((n, m)),
            phi_prev: Array2::zeros((n, m)),
            step_sizes,
        }
    }

    /// One LMS step per agent. Fails if any iterate leaves the ball of radius `bound`.
    pub fn adapt(&mut self, samples: &[DataSample], iteration: usize, bound: f64) -> Result<()> {
        assert_eq!(samples.len(), self.psi.nrows());
        for (k, sample) in samples.iter().enumerate() {
            let mut row = self.psi.row_mut(k);
            lms_step(&mut row, self.step_sizes[k], sample);
            let norm = row.dot(&row).sqrt();
            if !(norm <= bound) {
                return Err(Error::Divergence {
                    agent: k,
                    iteration,
                    norm,
                    bound,
                });
            }
        }
        Ok(())
    }

    /// Replaces `phi` with the aggregate under `a`, keeping the old value in `phi_prev`.
    pub fn aggregate(&mut self, a: &Array2<f64>, topology: &Topology) {
        let next = aggregate(&self.psi, a, topology);
        self.phi_prev = std::mem::replace(&mut self.phi, next);
    }
}

/// `psi <- psi + mu u^T (d - u psi)`.
pub fn lms_step(psi: &mut ArrayViewMut1<'_, f64>, mu: f64, sample: &DataSample) {
    let err = sample.d - sample.u.dot(&psi.view());
    psi.scaled_add(mu * err, &sample.u);
}

/// `phi_k = sum_l a_{lk} psi_l` over the closed neighborhood of each agent.
pub fn aggregate(psi: &Array2<f64>, a: &Array2<f64>, topology: &Topology) -> Array2<f64> {
    let mut phi = Array2::zeros(psi.raw_dim());
    for k in 0..psi.nrows() {
        let mut out = phi.row_mut(k);
        for &l in topology.neighbors(k) {
            let weight = a[[l, k]];
            if weight != 0.0 {
                out.scaled_add(weight, &psi.row(l));
            }
        }
    }
    phi
}

/// Clustering beliefs: instantaneous proximity `B`, smoothed `F`, rounded `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMatrices {
    pub b: Array2<u8>,
    pub f: Array2<f64>,
    pub e: Array2<u8>,
    pub alpha: f64,
    /// Weight of the newest proximity test in `F`.
    pub nu: f64,
}

/// Nearest integer with ties at one half rounding up.
pub fn round_belief(f: f64) -> u8 {
    if f >= 0.5 {
        1
    } else {
        0
    }
}

impl ClusterMatrices {
    /// `B = F = E = I`.
    pub fn new(n: usize, alpha: f64, nu: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        assert!((0.0..=1.0).contains(&nu), "nu must lie in [0, 1]");
        Self {
            b: Array2::eye(n),
            f: Array2::eye(n),
            e: Array2::eye(n),
            alpha,
            nu,
        }
    }

    /// One belief update. For `l` in `N_k`, `b_{lk}` tests
    /// `||psi_l - phi_k,prev||^2 <= alpha`, `f <- (1 - nu) f + nu b`
    /// and `e` rounds `f`. Self-entries stay at one and non-links at zero.
    pub fn update(&mut self, psi: &Array2<f64>, phi_prev: &Array2<f64>, topology: &Topology) {
        let n = topology.n_agents();
        for k in 0..n {
            for l in 0..n {
                if l == k {
                    self.b[[k, k]] = 1;
                    self.f[[k, k]] = 1.0;
                    self.e[[k, k]] = 1;
                } else if topology.is_linked(l, k) {
                    let b = u8::from(sq_dist(psi.row(l), phi_prev.row(k)) <= self.alpha);
                    let f = (1.0 - self.nu) * self.f[[l, k]] + self.nu * f64::from(b);
                    self.b[[l, k]] = b;
                    self.f[[l, k]] = f;
                    self.e[[l, k]] = round_belief(f);
                } else {
                    self.b[[l, k]] = 0;
                    self.f[[l, k]] = 0.0;
                    self.e[[l, k]] = 0;
                }
            }
        }
    }

    /// `N_{k,i}`: neighbors `k` believes share its observed model, always including `k`.
    pub fn believed_neighborhood(&self, k: usize, topology: &Topology) -> Vec<usize> {
        topology
            .neighbors(k)
            .iter()
            .copied()
            .filter(|&l| l == k || self.e[[l, k]] == 1)
            .collect()
    }
}

/// Uniform weights over `support`, as an `n`-vector.
pub fn uniform_column(support: &[usize], n: usize) -> Vec<f64> {
    assert!(!support.is_empty(), "combination support must be nonempty");
    let w = 1.0 / support.len() as f64;
    let mut col = vec![0.0; n];
    for &l in support {
        col[l] = w;
    }
    col
}

/// Left-stochastic matrix with column `k` uniform over
/// `{l in N_k : support[l, k] = 1}`; columns with empty support fall back to `e_k`.
pub fn uniform_left_stochastic(support: &Array2<u8>, topology: &Topology) -> Array2<f64> {
    let n = topology.n_agents();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let mut members: Vec<usize> = topology
            .neighbors(k)
            .iter()
            .copied()
            .filter(|&l| support[[l, k]] == 1)
            .collect();
        if members.is_empty() {
            members.push(k);
        }
        let w = 1.0 / members.len() as f64;
        for l in members {
            out[[l, k]] = w;
        }
    }
    out
}

/// `A_i` under the uniform policy over the believed neighborhoods.
pub fn build_combination_matrix(cluster: &ClusterMatrices, topology: &Topology) -> Array2<f64> {
    let n = topology.n_agents();
    let mut a = Array2::zeros((n, n));
    for k in 0..n {
        let col = uniform_column(&cluster.believed_neighborhood(k, topology), n);
        for (l, w) in col.into_iter().enumerate() {
            a[[l, k]] = w;
        }
    }
    a
}

/// Largest `|sum_l a_{lk} - 1|` over the columns in `cols`.
pub fn column_sum_error(a: &Array2<f64>, cols: impl IntoIterator<Item = usize>) -> f64 {
    cols.into_iter()
        .map(|k| (a.column(k).sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Per-coordinate bounds of `rows` of `x`, used by convex-hull checks.
pub fn coordinate_bounds(x: &Array2<f64>, rows: &[usize]) -> Vec<(f64, f64)> {
    (0..x.ncols())
        .map(|m| {
            rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(x[[l, m]]), hi.max(x[[l, m]]))
            })
        })
        .collect()
}
