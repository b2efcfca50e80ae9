//! Local majority decision-making over desired models.
//!
//! Every round each agent labels its neighbors by the model they currently
//! want to estimate, measures how much of its neighborhood agrees with it,
//! switches to the local majority when it is outvoted (or flips a coin between
//! two deadlocked camps), and finally updates its estimate from the neighbors
//! that share its desired model.

mod desired;
mod labeling;
mod switching;

pub use desired::{
    split_weights, update_desired_matrices, update_estimate, DesiredMatrices,
};
pub use labeling::{agreement_degree, build_label_view, column_label, LabelClass, LabelView};
pub use switching::{switch_decision, SwitchCase, SwitchOutcome};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::models::ModelSet;
use crate::network::Topology;
use crate::record::RunRecord;
use crate::sim::{NoObserver, Simulation};

/// Runs the decision-making loop on a fixed topology and assignment.
///
/// The noise profile and every random stream derive from `seed`.
pub fn run_algorithm1(
    config: &ExperimentConfig,
    models: &ModelSet,
    topology: &Topology,
    seed: u64,
) -> Result<RunRecord> {
    let mut sim = Simulation::decide(config, topology.clone(), models.clone(), seed)?;
    sim.run(&mut NoObserver)
}
