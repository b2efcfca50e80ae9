//! The synchronous round loop.
//!
//! One round, in order:
//!
//! 1. scheduled reassignment of agents to models;
//! 2. fresh data and one LMS step per agent (`w` tracks `psi` until
//!    `decision_start`);
//! 3. clustering beliefs against the previous aggregate, combination matrix, aggregation;
//! 4. anchor relay (follow mode);
//! 5. label views and agreement degrees from the previous desired estimates;
//! 6. switching (decide and mobile modes), agents in index order, each seeing
//!    the switches before it;
//! 7. desired-model matrices and the `w` update;
//! 8. metrics row, observer callback;
//! 9. motion and topology rebuild (mobile mode).

use std::time::Instant;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::anchor::{update_follow_matrices, AnchorState};
use crate::config::{ExperimentConfig, Mode};
use crate::decision::{
    agreement_degree, build_label_view, switch_decision, update_desired_matrices,
    update_estimate, DesiredMatrices, LabelView, SwitchOutcome,
};
use crate::diffusion::{build_combination_matrix, ClusterMatrices, DiffusionState};
use crate::error::{Error, Result};
use crate::metrics;
use crate::mobility::{self, MotionState};
use crate::models::{assign_agents, sample_data, DataSample, ModelSet, NoiseProfile};
use crate::network::Topology;
use crate::record::{IterationRow, RunRecord, TrajectoryPoint};
use crate::rng;

/// Everything computed in one round, handed to a [`RoundObserver`].
pub struct RoundView<'a> {
    pub iter: usize,
    pub mode: Mode,
    pub models: &'a ModelSet,
    /// Topology the round ran on.
    pub topology: &'a Topology,
    pub psi: &'a Array2<f64>,
    pub phi: &'a Array2<f64>,
    pub cluster: &'a ClusterMatrices,
    pub combination: &'a Array2<f64>,
    /// Label views as each agent saw them when deciding, after the switches
    /// of lower-indexed agents.
    pub views: &'a [LabelView],
    pub agreement: &'a [f64],
    /// `None` where the switching rule was not consulted.
    pub switches: &'a [Option<SwitchOutcome>],
    /// Desired estimates entering the round.
    pub w_prev: &'a Array2<f64>,
    /// `w_prev` after switching.
    pub w_switched: &'a Array2<f64>,
    pub desired: &'a DesiredMatrices,
    pub w: &'a Array2<f64>,
    pub anchor: Option<&'a AnchorState>,
    pub row: &'a IterationRow,
}

pub trait RoundObserver {
    fn observe(&mut self, round: &RoundView<'_>);
}

impl<F: FnMut(&RoundView<'_>)> RoundObserver for F {
    fn observe(&mut self, round: &RoundView<'_>) {
        self(round)
    }
}

pub struct NoObserver;

impl RoundObserver for NoObserver {
    fn observe(&mut self, _: &RoundView<'_>) {}
}

pub struct Simulation {
    config: ExperimentConfig,
    seed: u64,
    topology: Topology,
    models: ModelSet,
    noise: NoiseProfile,
    state: DiffusionState,
    cluster: ClusterMatrices,
    w: Array2<f64>,
    agreement: Vec<f64>,
    anchor: Option<AnchorState>,
    motion: Option<MotionState>,
    data_rng: Vec<ChaCha8Rng>,
    switch_rng: Vec<ChaCha8Rng>,
    iter: usize,
    z_d: Option<usize>,
    bound: f64,
    record: RunRecord,
    started: Instant,
}

impl Simulation {
    /// Generic constructor; `config.mode` selects the loop variant.
    pub fn new(
        config: &ExperimentConfig,
        topology: Topology,
        models: ModelSet,
        noise: NoiseProfile,
        seed: u64,
    ) -> Result<Self> {
        let n = topology.n_agents();
        let m = models.dim();
        if models.n_agents() != n {
            return Err(Error::Config(format!(
                "assignment covers {} agents but the topology has {n}",
                models.n_agents()
            )));
        }
        if noise.sigma_v2.len() != n || noise.ru_diag.dim() != (n, m) {
            return Err(Error::Config("noise profile does not match the network".into()));
        }
        if topology.max_degree() > 128 {
            return Err(Error::Config("neighborhoods larger than 128 agents are not supported".into()));
        }
        let anchor = match config.mode {
            Mode::Follow => {
                let target = config
                    .target_index()
                    .filter(|&t| t < n)
                    .ok_or_else(|| Error::Config("follow mode needs a valid target_agent".into()))?;
                Some(AnchorState::new(n, m, target))
            }
            _ => None,
        };
        let motion = match config.mode {
            Mode::Mobile => {
                if m != 2 {
                    return Err(Error::Config("mobile mode needs 2-D models".into()));
                }
                Some(MotionState::at_rest(topology.positions().to_vec()))
            }
            _ => None,
        };
        let scale = models
            .models()
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(1.0, f64::max);
        let mut record = RunRecord::empty(config.mode, n, models.n_models(), config.beta, config.hold_window);
        record.seed = seed;
        record.target_agent = anchor.as_ref().map(|a| a.target + 1);
        record.required_model = anchor.as_ref().map(|a| models.model_of(a.target));
        record.models = models.models().rows().into_iter().map(|r| r.to_vec()).collect();
        if anchor.is_some() {
            record.source_changes = Some(vec![0; n]);
        }
        Ok(Self {
            config: config.clone(),
            seed,
            state: DiffusionState::new(n, m, vec![config.mu; n]),
            cluster: ClusterMatrices::new(n, config.alpha, config.nu),
            w: Array2::zeros((n, m)),
            agreement: vec![0.0; n],
            anchor,
            motion,
            data_rng: rng::agent_streams(seed, rng::DATA, n),
            switch_rng: rng::agent_streams(seed, rng::SWITCH, n),
            iter: 0,
            z_d: None,
            bound: 1e3 * scale,
            record,
            started: Instant::now(),
            topology,
            models,
            noise,
        })
    }

    fn default_noise(config: &ExperimentConfig, n: usize, dim: usize, seed: u64) -> NoiseProfile {
        NoiseProfile::generate(n, dim, config.noise.sigma_v2, config.noise.ru, rng::derive_seed(seed, rng::NOISE))
    }

    /// Decision-making on a fixed topology; the noise profile derives from `seed`.
    pub fn decide(config: &ExperimentConfig, topology: Topology, models: ModelSet, seed: u64) -> Result<Self> {
        let config = ExperimentConfig {
            mode: Mode::Decide,
            ..config.clone()
        };
        let noise = Self::default_noise(&config, topology.n_agents(), models.dim(), seed);
        Self::new(&config, topology, models, noise, seed)
    }

    /// Following the observed model of agent `target` (zero-based).
    pub fn follow(
        config: &ExperimentConfig,
        topology: Topology,
        models: ModelSet,
        target: usize,
        seed: u64,
    ) -> Result<Self> {
        let config = ExperimentConfig {
            mode: Mode::Follow,
            target_agent: Some(target + 1),
            ..config.clone()
        };
        let noise = Self::default_noise(&config, topology.n_agents(), models.dim(), seed);
        Self::new(&config, topology, models, noise, seed)
    }

    /// Mobile decision-making; agents spawn around the origin.
    pub fn mobile(config: &ExperimentConfig, models: ModelSet, seed: u64) -> Result<Self> {
        let config = ExperimentConfig {
            mode: Mode::Mobile,
            ..config.clone()
        };
        let n = models.n_agents();
        let mut spawn_rng = rng::rng_for(seed, rng::MOTION);
        let topology = mobility::spawn(n, &config.motion, config.max_degree, &mut spawn_rng)?;
        let noise = Self::default_noise(&config, n, models.dim(), seed);
        Self::new(&config, topology, models, noise, seed)
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn models(&self) -> &ModelSet {
        &self.models
    }

    pub fn desired_estimates(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn diffusion(&self) -> &DiffusionState {
        &self.state
    }

    pub fn motion(&self) -> Option<&MotionState> {
        self.motion.as_ref()
    }

    fn reassign(&mut self, i: usize) {
        let seed = rng::derive_seed(rng::derive_seed(self.seed, rng::REASSIGNMENT), i as u64);
        self.models = assign_agents(&self.models, self.topology.n_agents(), seed);
        self.z_d = None;
        if let Some(a) = &self.anchor {
            self.record.required_model = Some(self.models.model_of(a.target));
        }
    }

    /// Runs one round.
    pub fn step(&mut self, observer: &mut dyn RoundObserver) -> Result<()> {
        self.iter += 1;
        let i = self.iter;
        let n = self.topology.n_agents();
        let beta = self.config.beta;
        if self.config.reassign_at.contains(&i) {
            self.reassign(i);
        }

        let samples: Vec<DataSample> = (0..n)
            .map(|k| sample_data(k, &self.models, &self.noise, &mut self.data_rng[k]))
            .collect();
        self.state.adapt(&samples, i, self.bound)?;
        let deciding = i >= self.config.decision_start;
        if i <= self.config.decision_start {
            self.w.assign(&self.state.psi);
        }

        // `state.phi` still holds the previous round's aggregate here.
        self.cluster.update(&self.state.psi, &self.state.phi, &self.topology);
        let combination = build_combination_matrix(&self.cluster, &self.topology);
        self.state.aggregate(&combination, &self.topology);

        if let Some(anchor) = self.anchor.as_mut() {
            anchor.spread(&self.state.psi, &self.topology);
        }

        let mut switches = vec![None; n];
        let mut w_switched = self.w.clone();
        let mut views: Vec<LabelView> = Vec::with_capacity(n);
        if self.anchor.is_some() || !deciding {
            views.extend((0..n).map(|k| build_label_view(k, &self.w, &self.topology, beta)));
        } else {
            // Agents decide in index order and resend at once, so agent k
            // labels its neighborhood with the switches of agents before it.
            for k in 0..n {
                let view = build_label_view(k, &w_switched, &self.topology, beta);
                if !view.fully_agreed() {
                    let outcome = switch_decision(&view, self.config.equilibrium_breaking, &mut self.switch_rng[k]);
                    if outcome.switched(k) {
                        let source = w_switched.row(outcome.source).to_owned();
                        w_switched.row_mut(k).assign(&source);
                        self.record.switch_counts[k] += 1;
                    }
                    switches[k] = Some(outcome);
                }
                views.push(view);
            }
        }
        self.agreement = views.iter().map(agreement_degree).collect();

        let desired = match &self.anchor {
            _ if !deciding => DesiredMatrices::identity(n),
            Some(anchor) => update_follow_matrices(anchor, &self.state.psi, &self.topology, beta),
            None => update_desired_matrices(&w_switched, &self.state.psi, &self.topology, beta),
        };
        let w_next = if deciding {
            update_estimate(&w_switched, &self.state.phi, &desired.a_dot, &desired.a_ddot, &self.topology)
        } else {
            self.state.psi.clone()
        };

        let all_agreed = deciding && views.iter().all(LabelView::fully_agreed);
        if let Some(anchor) = &self.anchor {
            self.z_d = Some(self.models.model_of(anchor.target));
        } else if all_agreed && self.z_d.is_none() {
            self.z_d = Some(self.models.nearest(metrics::mean_row(&w_next).view()).0);
        }
        let row = IterationRow {
            iter: i,
            msd: metrics::msd_observed(&self.state.phi, &self.models),
            msd_d: match (all_agreed, self.z_d) {
                (true, Some(j)) => Some(metrics::msd_desired(&w_next, self.models.model(j))),
                _ => None,
            },
            distinct_desired: metrics::distinct_desired(&w_next, beta),
            all_agreed,
            coverage: self.anchor.as_ref().map(AnchorState::coverage),
        };

        observer.observe(&RoundView {
            iter: i,
            mode: self.config.mode,
            models: &self.models,
            topology: &self.topology,
            psi: &self.state.psi,
            phi: &self.state.phi,
            cluster: &self.cluster,
            combination: &combination,
            views: &views,
            agreement: &self.agreement,
            switches: &switches,
            w_prev: &self.w,
            w_switched: &w_switched,
            desired: &desired,
            w: &w_next,
            anchor: self.anchor.as_ref(),
            row: &row,
        });
        self.record.rows.push(row);
        self.w = w_next;

        if let Some(ms) = self.motion.as_mut() {
            if mobility::is_snapshot(i, self.config.max_iters, self.config.trajectory_every) {
                for (k, p) in ms.positions.iter().enumerate() {
                    self.record.trajectory.push(TrajectoryPoint {
                        iter: i,
                        agent: k + 1,
                        x: p[0],
                        y: p[1],
                        desired_label: self.models.nearest(self.w.row(k)).0 + 1,
                    });
                }
            }
            let peak = mobility::step_motion(ms, &self.w, &self.topology, &self.config.motion);
            self.record.peak_speed = Some(self.record.peak_speed.unwrap_or(0.0).max(peak));
            self.topology = mobility::rebuild_topology(
                &ms.positions,
                self.config.motion.comm_radius,
                self.config.max_degree,
            );
        }
        Ok(())
    }

    /// Runs the remaining rounds and returns the finished record.
    ///
    /// On divergence the error is returned; [`Simulation::finish`] still gives
    /// the partial record.
    pub fn run(&mut self, observer: &mut dyn RoundObserver) -> Result<RunRecord> {
        while self.iter < self.config.max_iters {
            self.step(observer)?;
        }
        Ok(self.finish())
    }

    /// Record of the rounds run so far, with final estimates and verdict.
    pub fn finish(&mut self) -> RunRecord {
        let mut r = self.record.clone();
        r.assignment = self.models.assignment().to_vec();
        r.final_estimates = self.w.rows().into_iter().map(|row| row.to_vec()).collect();
        r.final_agreement = self.agreement.clone();
        if let Some(a) = &self.anchor {
            r.source_changes = Some(a.source_changes.clone());
        }
        let verdict = metrics::evaluate_success(&r, &self.models, self.config.beta);
        r.decision_success = verdict.success;
        r.final_label = verdict.model.map(|j| j + 1);
        r.success = verdict.success;
        if let Some(ms) = &self.motion {
            let capture = metrics::captured(&ms.positions, &self.models, self.config.motion.capture_radius);
            r.captured = capture.map(|j| j + 1);
            r.final_positions = Some(ms.positions.clone());
            r.success = verdict.success && capture.is_some() && capture == verdict.model;
        }
        r.wall_time_secs = self.started.elapsed().as_secs_f64();
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_agents: 6,
            max_iters: 300,
            hold_window: 20,
            ..ExperimentConfig::decide()
        }
    }

    fn complete(n: usize) -> Topology {
        let edges: Vec<_> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        Topology::from_edges(n, &edges, vec![[0.0; 2]; n])
    }

    #[test]
    fn single_model_never_switches() {
        let models = ModelSet::new(array![[0.3, -0.4]], vec![0; 6]);
        let mut sim = Simulation::decide(&small_config(), complete(6), models, 5).unwrap();
        let r = sim.run(&mut NoObserver).unwrap();
        assert_eq!(r.total_switches(), 0);
        assert!(r.success);
        assert_eq!(r.final_label, Some(1));
        assert!(r.rows.last().unwrap().all_agreed);
    }

    #[test]
    fn w_starts_from_first_intermediate_iterate() {
        let models = ModelSet::new(array![[0.3, -0.4], [-0.5, 0.6]], vec![0, 0, 0, 1, 1, 1]);
        let mut sim = Simulation::decide(&small_config(), complete(6), models, 2).unwrap();
        let mut seen = None;
        sim.step(&mut |v: &RoundView<'_>| seen = Some(v.w_prev.clone())).unwrap();
        assert_eq!(seen.unwrap(), sim.diffusion().psi);
    }

    #[test]
    fn same_seed_same_record() {
        let models = ModelSet::new(array![[0.6, 0.6], [-0.6, -0.6]], vec![0, 0, 0, 0, 1, 1]);
        let run = || {
            let mut sim = Simulation::decide(&small_config(), complete(6), models.clone(), 11).unwrap();
            let mut r = sim.run(&mut NoObserver).unwrap();
            r.wall_time_secs = 0.0;
            r
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn follow_tracks_target() {
        let cfg = ExperimentConfig {
            max_iters: 600,
            ..small_config()
        };
        let models = ModelSet::new(array![[0.6, 0.6], [-0.6, -0.6]], vec![0, 0, 0, 0, 0, 1]);
        let mut sim = Simulation::follow(&cfg, Topology::chain(6), models, 5, 3).unwrap();
        let r = sim.run(&mut NoObserver).unwrap();
        assert_eq!(r.required_model, Some(1));
        assert!(r.success, "{:?}", r.final_estimates);
        assert_eq!(r.rows.last().unwrap().coverage, Some(6));
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let models = ModelSet::new(array![[0.3, -0.4]], vec![0; 5]);
        assert!(matches!(
            Simulation::decide(&small_config(), complete(6), models, 1),
            Err(Error::Config(_))
        ));
    }
}
