use thiserror::Error;

/// Errors raised by topology construction, simulation and I/O.
///
/// Agent indices carried by variants are zero-based; `Display` renders them
/// one-based to match every external file format.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "no connected topology for {n_agents} agents with max degree {max_degree} \
         at radius {radius} after {attempts} attempts"
    )]
    InfeasibleTopology {
        n_agents: usize,
        max_degree: usize,
        radius: f64,
        attempts: usize,
    },

    #[error(
        "LMS iterate of agent {} diverged at iteration {iteration} \
         (norm {norm:.3e} exceeds {bound:.3e}); step size too large?",
        agent + 1
    )]
    Divergence {
        agent: usize,
        iteration: usize,
        norm: f64,
        bound: f64,
    },

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
