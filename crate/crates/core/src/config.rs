//! Experiment configuration.
//!
//! Configuration files are TOML. Every key is optional: a file is laid over
//! the defaults of the chosen mode, so
//!
//! ```toml
//! n_models = 5
//! seed = 7
//!
//! [noise]
//! sigma_v2 = [0.001, 0.01]
//! ```
//!
//! changes only those three values. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::network::TopologyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Reach agreement on any one of the observed models.
    Decide,
    /// Steer the network to the observed model of one designated agent.
    Follow,
    /// Decide while moving toward the chosen model on a time-varying topology.
    Mobile,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Decide => "decide",
            Mode::Follow => "follow",
            Mode::Mobile => "mobile",
        })
    }
}

/// Ranges the per-agent noise profile is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBounds {
    /// Measurement noise variance, drawn log-uniformly.
    pub sigma_v2: [f64; 2],
    /// Diagonal entries of the regressor covariance, drawn uniformly.
    pub ru: [f64; 2],
}

impl Default for NoiseBounds {
    fn default() -> Self {
        Self {
            sigma_v2: [1e-3, 1e-2],
            ru: [0.8, 1.2],
        }
    }
}

/// Substitute motion law: goal seeking, velocity alignment and a spacing
/// spring between linked agents. Lengths are in body lengths, speeds in body
/// lengths per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionParams {
    pub gamma_goal: f64,
    pub gamma_align: f64,
    pub gamma_spacing: f64,
    /// Body lengths per step.
    pub max_speed: f64,
    pub comm_radius: f64,
    /// Rest length of the spring to each linked neighbor.
    pub spacing: f64,
    /// Agents start uniformly in a square of this side centred on the origin.
    pub spawn_extent: f64,
    /// Distance to a source counted as arrival.
    pub capture_radius: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            gamma_goal: 0.3,
            gamma_align: 0.2,
            gamma_spacing: 0.5,
            max_speed: 0.25,
            comm_radius: 4.0,
            spacing: 2.0,
            spawn_extent: 20.0,
            capture_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n_agents: usize,
    pub dim: usize,
    pub n_models: usize,
    pub model_range: [f64; 2],
    /// Cap on the closed neighborhood size, the agent itself included.
    pub max_degree: usize,
    /// Link radius of the static generator, on the unit square.
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub mu: f64,
    pub max_iters: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// Designated agent for follow mode, one-based.
    pub target_agent: Option<usize>,
    /// Iterations at which agents are reassigned to models at random.
    pub reassign_at: Vec<usize>,
    pub equilibrium_breaking: bool,
    /// First round of decision-making. Earlier rounds only learn, with each
    /// desired estimate tracking the agent's own intermediate iterate; the
    /// estimate entering this round is that iterate. `1` starts from the
    /// first LMS step.
    pub decision_start: usize,
    /// Trailing rounds of full agreement required for success.
    pub hold_window: usize,
    pub noise: NoiseBounds,
    pub motion: MotionParams,
    pub output_dir: Option<PathBuf>,
    /// Record agent positions every this many rounds in mobile mode (0 = snapshots only).
    pub trajectory_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::decide()
    }
}

impl ExperimentConfig {
    /// Static network: 80 agents, three models in `[-1, 1]^2`.
    pub fn decide() -> Self {
        Self {
            mode: Mode::Decide,
            n_agents: 80,
            dim: 2,
            n_models: 3,
            model_range: [-1.0, 1.0],
            max_degree: 7,
            radius: 0.18,
            alpha: 0.04,
            beta: 0.08,
            nu: 0.005,
            mu: 0.01,
            max_iters: 1000,
            n_trials: 100,
            seed: 1,
            target_agent: None,
            reassign_at: Vec::new(),
            equilibrium_breaking: true,
            decision_start: 150,
            hold_window: 50,
            noise: NoiseBounds::default(),
            motion: MotionParams::default(),
            output_dir: None,
            trajectory_every: 0,
        }
    }

    /// Four models, agent 10 designated.
    pub fn follow() -> Self {
        Self {
            mode: Mode::Follow,
            n_models: 4,
            target_agent: Some(10),
            decision_start: 1,
            ..Self::decide()
        }
    }

    /// Four sources in `[-50, 50]^2`. Thresholds are scaled with the square
    /// of the source range so they keep the same relative resolution.
    pub fn mobile() -> Self {
        let scale = 50.0 * 50.0;
        Self {
            mode: Mode::Mobile,
            n_models: 4,
            model_range: [-50.0, 50.0],
            alpha: 0.04 * scale,
            beta: 0.08 * scale,
            // Agents move during warm-up, so the swarm would scatter toward
            // every source before deciding.
            decision_start: 1,
            ..Self::decide()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Decide => Self::decide(),
            Mode::Follow => Self::follow(),
            Mode::Mobile => Self::mobile(),
        }
    }

    /// Parses `text` as TOML laid over `base`.
    pub fn from_toml_over(base: &Self, text: &str) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text)?;
        let mut merged = toml::Table::try_from(base)
            .map_err(|e| Error::Config(format!("serializing defaults: {e}")))?;
        merge_tables(&mut merged, overlay);
        let cfg: Self = toml::Value::Table(merged).try_into()?;
        Ok(cfg)
    }

    /// Reads a config file; its `mode` key, if any, selects the defaults it overlays.
    pub fn load(path: &std::path::Path, fallback_mode: Mode) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let probe: toml::Table = toml::from_str(&text)?;
        let mode = match probe.get("mode").and_then(|v| v.as_str()) {
            Some("decide") => Mode::Decide,
            Some("follow") => Mode::Follow,
            Some("mobile") => Mode::Mobile,
            Some(other) => return Err(Error::Config(format!("unknown mode {other:?}"))),
            None => fallback_mode,
        };
        Self::from_toml_over(&Self::for_mode(mode), &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Squared distance models must exceed pairwise, `4 beta`.
    pub fn separation_floor(&self) -> f64 {
        4.0 * self.beta
    }

    pub fn topology_params(&self) -> TopologyParams {
        TopologyParams {
            n_agents: self.n_agents,
            max_degree: self.max_degree,
            radius: self.radius,
        }
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            n_models: self.n_models,
            dim: self.dim,
            range: self.model_range,
            separation_floor: self.separation_floor(),
        }
    }

    /// Zero-based designated agent.
    pub fn target_index(&self) -> Option<usize> {
        self.target_agent.map(|m| m - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_agents < 2 {
            return fail(format!("n_agents must be at least 2, got {}", self.n_agents));
        }
        if self.dim < 1 {
            return fail("dim must be at least 1".into());
        }
        if self.n_models < 1 || self.n_models > self.n_agents {
            return fail(format!(
                "n_models must lie in 1..={}, got {}",
                self.n_agents, self.n_models
            ));
        }
        if !(self.model_range[0] < self.model_range[1]) {
            return fail(format!("model_range {:?} is empty", self.model_range));
        }
        if self.max_degree < 2 || self.max_degree > 128 {
            return fail(format!("max_degree must lie in 2..=128, got {}", self.max_degree));
        }
        if !(self.radius > 0.0) {
            return fail("radius must be positive".into());
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return fail("alpha and beta must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return fail(format!("nu must lie in [0, 1], got {}", self.nu));
        }
        if !(self.mu > 0.0) {
            return fail("mu must be positive".into());
        }
        if self.max_iters < 1 || self.n_trials < 1 {
            return fail("max_iters and n_trials must be at least 1".into());
        }
        let [s_lo, s_hi] = self.noise.sigma_v2;
        let [r_lo, r_hi] = self.noise.ru;
        if !(s_lo > 0.0 && s_lo <= s_hi && r_lo > 0.0 && r_lo <= r_hi) {
            return fail("noise bounds must be positive, ordered intervals".into());
        }
        match (self.mode, self.target_agent) {
            (Mode::Follow, None) => return fail("follow mode needs target_agent".into()),
            (_, Some(m)) if m < 1 || m > self.n_agents => {
                return fail(format!(
                    "target_agent is one-based and must lie in 1..={}, got {m}",
                    self.n_agents
                ))
            }
            _ => {}
        }
        if self.decision_start < 1 {
            return fail("decision_start must be at least 1".into());
        }
        if self.reassign_at.iter().any(|&i| i < 2) {
            return fail("reassignment iterations must be at least 2".into());
        }
        if self.mode == Mode::Mobile {
            if self.dim != 2 {
                return fail("mobile mode uses models as 2-D locations; dim must be 2".into());
            }
            let m = &self.motion;
            let gammas = [m.gamma_goal, m.gamma_align, m.gamma_spacing];
            if gammas.iter().any(|&g| g < 0.0) || gammas.iter().sum::<f64>() <= 0.0 {
                return fail("motion weights must be nonnegative and not all zero".into());
            }
            if !(m.max_speed > 0.0 && m.comm_radius > 0.0 && m.spawn_extent > 0.0) {
                return fail("max_speed, comm_radius and spawn_extent must be positive".into());
            }
            if !(m.spacing >= 0.0 && m.capture_radius > 0.0) {
                return fail("spacing must be nonnegative and capture_radius positive".into());
            }
        }
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for mode in [Mode::Decide, Mode::Follow, Mode::Mobile] {
            ExperimentConfig::for_mode(mode).validate().unwrap();
        }
        let d = ExperimentConfig::decide();
        assert_eq!((d.alpha, d.beta, d.nu, d.mu), (0.04, 0.08, 0.005, 0.01));
        assert_eq!(d.n_agents, 80);
        assert_eq!(d.max_degree, 7);
    }

    #[test]
    fn overlay_changes_only_given_keys() {
        let cfg = ExperimentConfig::from_toml_over(
            &ExperimentConfig::decide(),
            "n_models = 5\n[noise]\nsigma_v2 = [0.002, 0.02]\n",
        )
        .unwrap();
        assert_eq!(cfg.n_models, 5);
        assert_eq!(cfg.noise.sigma_v2, [0.002, 0.02]);
        assert_eq!(cfg.noise.ru, [0.8, 1.2]);
        assert_eq!(cfg.mu, 0.01);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_over(&ExperimentConfig::decide(), "n_agentz = 3").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::mobile();
        let back = ExperimentConfig::from_toml_over(&ExperimentConfig::decide(), &cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_fail() {
        let bad = [
            ExperimentConfig { nu: 1.5, ..ExperimentConfig::decide() },
            ExperimentConfig { beta: 0.0, ..ExperimentConfig::decide() },
            ExperimentConfig { mu: -0.1, ..ExperimentConfig::decide() },
            ExperimentConfig { target_agent: Some(81), ..ExperimentConfig::follow() },
            ExperimentConfig { target_agent: None, ..ExperimentConfig::follow() },
            ExperimentConfig { dim: 3, ..ExperimentConfig::mobile() },
            ExperimentConfig { n_models: 81, ..ExperimentConfig::decide() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
