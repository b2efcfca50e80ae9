//! Ground-truth models, agent assignment, noise profiles and the data stream
//! `d_k(i) = u_{k,i} w°_k + v_k(i)`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng;

/// Redraws allowed before [`generate_models`] settles for its best draw.
pub const MODEL_RETRY_CAP: usize = 10_000;
const ASSIGNMENT_RETRY_CAP: usize = 10_000;

/// The `C` ground-truth vectors and, once assigned, which one each agent observes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    /// `C x M`, one model per row.
    models: Array2<f64>,
    /// Agent `k` observes `models[assignment[k]]`. Empty until assigned.
    assignment: Vec<usize>,
    /// Smallest pairwise squared distance between models (infinite for `C = 1`).
    min_separation: f64,
}

impl ModelSet {
    pub fn new(models: Array2<f64>, assignment: Vec<usize>) -> Self {
        assert!(models.nrows() >= 1, "at least one model");
        assert!(
            assignment.iter().all(|&j| j < models.nrows()),
            "assignment refers to a missing model"
        );
        let min_separation = min_pairwise_sq(&models);
        Self {
            models,
            assignment,
            min_separation,
        }
    }

    pub fn n_models(&self) -> usize {
        self.models.nrows()
    }

    pub fn dim(&self) -> usize {
        self.models.ncols()
    }

    pub fn n_agents(&self) -> usize {
        self.assignment.len()
    }

    pub fn models(&self) -> &Array2<f64> {
        &self.models
    }

    pub fn model(&self, j: usize) -> ArrayView1<'_, f64> {
        self.models.row(j)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn model_of(&self, k: usize) -> usize {
        self.assignment[k]
    }

    /// `w°_k`.
    pub fn observed(&self, k: usize) -> ArrayView1<'_, f64> {
        self.models.row(self.assignment[k])
    }

    /// Agents observing model `j`.
    pub fn cluster(&self, j: usize) -> Vec<usize> {
        (0..self.n_agents())
            .filter(|&k| self.assignment[k] == j)
            .collect()
    }

    /// `col{w°_1, ..., w°_N}`, length `M N`.
    pub fn stacked(&self) -> Array1<f64> {
        let m = self.dim();
        let mut out = Array1::zeros(m * self.n_agents());
        for k in 0..self.n_agents() {
            out.slice_mut(ndarray::s![k * m..(k + 1) * m])
                .assign(&self.observed(k));
        }
        out
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn pairwise_sq_distances(&self) -> Array2<f64> {
        let c = self.n_models();
        Array2::from_shape_fn((c, c), |(a, b)| sq_dist(self.model(a), self.model(b)))
    }

    /// Index of the model closest to `x` in squared norm (lowest index on ties).
    pub fn nearest(&self, x: ArrayView1<'_, f64>) -> (usize, f64) {
        (0..self.n_models())
            .map(|j| (j, sq_dist(self.model(j), x)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn min_pairwise_sq(models: &Array2<f64>) -> f64 {
    let c = models.nrows();
    let mut best = f64::INFINITY;
    for a in 0..c {
        for b in (a + 1)..c {
            best = best.min(sq_dist(models.row(a), models.row(b)));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_models: usize,
    pub dim: usize,
    /// Closed interval each entry is drawn from.
    pub range: [f64; 2],
    /// Pairs of models must be strictly farther apart than this squared distance.
    pub separation_floor: f64,
}

/// Draws `C` models with i.i.d. uniform entries on `range`, redrawing while any
/// pair sits within the separation floor. After [`MODEL_RETRY_CAP`] draws the
/// best-separated draw seen is returned.
pub fn generate_models(params: &ModelParams, seed: u64) -> ModelSet {
    assert!(params.n_models >= 1 && params.dim >= 1);
    let [lo, hi] = params.range;
    let mut rng = rng::rng_for(seed, rng::MODELS);
    let mut best: Option<(f64, Array2<f64>)> = None;
    for _ in 0..MODEL_RETRY_CAP {
        let draw = Array2::from_shape_fn((params.n_models, params.dim), |_| {
            lo + (hi - lo) * rng.random::<f64>()
        });
        let sep = min_pairwise_sq(&draw);
        if sep > params.separation_floor {
            return ModelSet::new(draw, Vec::new());
        }
        if best.as_ref().is_none_or(|(s, _)| sep > *s) {
            best = Some((sep, draw));
        }
    }
    let (_, draw) = best.expect("retry cap is nonzero");
    ModelSet::new(draw, Vec::new())
}

/// Uniform random assignment of `n_agents` agents to the models, redrawn until
/// every model has at least one follower.
pub fn assign_agents(models: &ModelSet, n_agents: usize, seed: u64) -> ModelSet {
    let c = models.n_models();
    assert!(c <= n_agents, "more models ({c}) than agents ({n_agents})");
    let mut rng = rng::rng_for(seed, rng::ASSIGNMENT);
    let mut assignment = vec![0; n_agents];
    for _ in 0..ASSIGNMENT_RETRY_CAP {
        for a in assignment.iter_mut() {
            *a = rng.random_range(0..c);
        }
        let mut seen = vec![false; c];
        for &a in &assignment {
            seen[a] = true;
        }
        if seen.iter().all(|&s| s) {
            break;
        }
    }
    // Only reachable when C is close to N; force coverage on the leading agents.
    let mut seen = vec![false; c];
    for &a in &assignment {
        seen[a] = true;
    }
    if !seen.iter().all(|&s| s) {
        for (k, a) in assignment.iter_mut().enumerate().take(c) {
            *a = k;
        }
    }
    ModelSet::new(models.models.clone(), assignment)
}

/// Per-agent noise variances and diagonal regressor covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// `sigma^2_{v,k}`, length `N`.
    pub sigma_v2: Vec<f64>,
    /// Diagonal of `R_{u,k}`, `N x M`.
    pub ru_diag: Array2<f64>,
}

impl NoiseProfile {
    /// Same variances for every agent.
    pub fn uniform(n_agents: usize, dim: usize, sigma_v2: f64, ru: f64) -> Self {
        Self {
            sigma_v2: vec![sigma_v2; n_agents],
            ru_diag: Array2::from_elem((n_agents, dim), ru),
        }
    }

    /// Unit-covariance regressors with no measurement noise. Test streams only.
    pub fn noiseless(n_agents: usize, dim: usize) -> Self {
        Self::uniform(n_agents, dim, 0.0, 1.0)
    }

    /// `sigma^2_{v,k}` log-uniform on `sigma_v2`, `R_{u,k}` diagonal entries
    /// uniform on `ru`.
    pub fn generate(n_agents: usize, dim: usize, sigma_v2: [f64; 2], ru: [f64; 2], seed: u64) -> Self {
        let mut rng = rng::rng_for(seed, rng::NOISE);
        let (ln_lo, ln_hi) = (sigma_v2[0].ln(), sigma_v2[1].ln());
        let sigma_v2 = (0..n_agents)
            .map(|_| (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp())
            .collect();
        let ru_diag = Array2::from_shape_fn((n_agents, dim), |_| {
            ru[0] + (ru[1] - ru[0]) * rng.random::<f64>()
        });
        Self { sigma_v2, ru_diag }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma_v2.iter().all(|&s| s > 0.0 && s.is_finite())
            && self.ru_diag.iter().all(|&r| r > 0.0 && r.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    pub d: f64,
    /// `1 x M` regressor.
    pub u: Array1<f64>,
    pub v: f64,
}

/// One fresh `(d, u)` pair for `agent`.
pub fn sample_data<R: Rng + ?Sized>(
    agent: usize,
    models: &ModelSet,
    noise: &NoiseProfile,
    rng: &mut R,
) -> DataSample {
    let m = models.dim();
    let u: Array1<f64> = (0..m)
        .map(|j| {
            let z: f64 = StandardNormal.sample(rng);
            noise.ru_diag[[agent, j]].sqrt() * z
        })
        .collect();
    let z: f64 = StandardNormal.sample(rng);
    let v = noise.sigma_v2[agent].sqrt() * z;
    let d = u.dot(&models.observed(agent)) + v;
    DataSample { d, u, v }
}
