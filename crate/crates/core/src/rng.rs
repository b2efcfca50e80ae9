//! Seed derivation.
//!
//! Every random quantity in a run comes from a stream derived from one trial
//! seed, and every trial seed comes from the master seed:
//!
//! ```text
//! trial_seed(master, t) = splitmix64(master ^ splitmix64(TRIAL_TAG + t))
//! derive_seed(seed, tag) = splitmix64(seed ^ splitmix64(tag))
//! ```
//!
//! Per-agent quantities (data, switching draws) use one ChaCha stream per
//! agent, selected with `set_stream(agent)`, so the order in which agents are
//! processed never changes the numbers they see.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOPOLOGY: u64 = 0x01;
pub const MODELS: u64 = 0x02;
pub const ASSIGNMENT: u64 = 0x03;
pub const NOISE: u64 = 0x04;
pub const DATA: u64 = 0x05;
pub const SWITCH: u64 = 0x06;
pub const MOTION: u64 = 0x07;
pub const REASSIGNMENT: u64 = 0x08;

const TRIAL_TAG: u64 = 0x7472_6961_6c00_0000;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    splitmix64(master ^ splitmix64(TRIAL_TAG.wrapping_add(trial as u64)))
}

pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// One independent stream per agent.
pub fn agent_streams(seed: u64, tag: u64, n_agents: usize) -> Vec<ChaCha8Rng> {
    let base = derive_seed(seed, tag);
    (0..n_agents)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(k as u64);
            rng
        })
        .collect()
}
