//! Command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mtdecide::harness::{build_trial, sweep, MonteCarloOutput};
use mtdecide::record::{write_rows_csv, write_trajectory_csv};
use mtdecide::{run_monte_carlo, Error, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "mtdecide", version, about = "Decentralized decision-making over multi-task diffusion networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Agree on any one observed model over a static network.
    Decide(RunArgs),
    /// Steer every agent to the observed model of one designated agent.
    Follow(RunArgs),
    /// Decide while moving toward the chosen source.
    Mobile(RunArgs),
    /// Monte Carlo runs for several model counts.
    Sweep {
        /// Model counts to run.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        models: Vec<usize>,
        /// Loop variant to sweep.
        #[arg(long, default_value = "decide")]
        mode: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML file laid over the mode's defaults; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "MTDECIDE_OUT")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n_agents: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_models: Option<usize>,
    /// Entry range of the models, as `LO,HI`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    model_range: Option<Vec<f64>>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Designated agent, one-based.
    #[arg(long)]
    target_agent: Option<usize>,
    /// Iterations at which agents are reassigned, comma separated.
    #[arg(long, value_delimiter = ',')]
    reassign_at: Option<Vec<usize>>,
    #[arg(long)]
    equilibrium_breaking: Option<bool>,
    /// First round of decision-making; earlier rounds only learn.
    #[arg(long)]
    decision_start: Option<usize>,
    #[arg(long)]
    hold_window: Option<usize>,
    /// Measurement noise variance range, `LO,HI`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    sigma_v2: Option<Vec<f64>>,
    /// Regressor variance range, `LO,HI`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    ru: Option<Vec<f64>>,
    #[arg(long)]
    gamma_goal: Option<f64>,
    #[arg(long)]
    gamma_align: Option<f64>,
    #[arg(long)]
    gamma_spacing: Option<f64>,
    #[arg(long)]
    max_speed: Option<f64>,
    #[arg(long)]
    comm_radius: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    spawn_extent: Option<f64>,
    #[arg(long)]
    capture_radius: Option<f64>,
    #[arg(long)]
    trajectory_every: Option<usize>,
    /// Run trials one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Skip the per-trial CSV and JSON files.
    #[arg(long)]
    summary_only: bool,
    /// Also write each trial's initial topology as JSON.
    #[arg(long)]
    export_topology: bool,
}

fn pair(v: &Option<Vec<f64>>) -> Option<[f64; 2]> {
    v.as_ref().map(|v| [v[0], v[1]])
}

impl RunArgs {
    fn config(&self, mode: Mode) -> mtdecide::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path, mode)?,
            None => ExperimentConfig::for_mode(mode),
        };
        if c.mode != mode {
            let base = ExperimentConfig::for_mode(mode);
            c.mode = mode;
            if mode == Mode::Follow && c.target_agent.is_none() {
                c.target_agent = base.target_agent;
            }
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(n_agents, dim, n_models, max_degree, radius, alpha, beta, nu, mu, max_iters, n_trials, seed);
        set!(reassign_at, equilibrium_breaking, decision_start, hold_window, trajectory_every);
        macro_rules! set_motion {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.motion.$field = v;
                }
            )*};
        }
        set_motion!(gamma_goal, gamma_align, gamma_spacing, max_speed, comm_radius, spacing, spawn_extent, capture_radius);
        if let Some(r) = pair(&self.model_range) {
            c.model_range = r;
        }
        if let Some(r) = pair(&self.sigma_v2) {
            c.noise.sigma_v2 = r;
        }
        if let Some(r) = pair(&self.ru) {
            c.noise.ru = r;
        }
        if self.target_agent.is_some() {
            c.target_agent = self.target_agent;
        }
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct TopologyExport {
    agents: Vec<AgentExport>,
    links: Vec<[usize; 2]>,
    models: Vec<Vec<f64>>,
    assignment: Vec<usize>,
}

#[derive(Serialize)]
struct AgentExport {
    id: usize,
    x: f64,
    y: f64,
}

fn write_outputs(config: &ExperimentConfig, out: &MonteCarloOutput, dir: &Path, args: &RunArgs) -> mtdecide::Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("summary.json"))?), &out.summary)?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    if !args.summary_only {
        for (t, r) in out.records.iter().enumerate() {
            write_rows_csv(&r.rows, r.n_models, BufWriter::new(File::create(dir.join(format!("trial_{t:03}.csv")))?))?;
            r.write_json(BufWriter::new(File::create(dir.join(format!("trial_{t:03}.json")))?))?;
            if !r.trajectory.is_empty() {
                let f = File::create(dir.join(format!("trajectory_{t:03}.csv")))?;
                write_trajectory_csv(&r.trajectory, BufWriter::new(f))?;
            }
        }
    }
    if args.export_topology {
        for t in 0..config.n_trials {
            let sim = build_trial(config, t)?;
            let topo = sim.topology();
            let export = TopologyExport {
                agents: topo
                    .positions()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| AgentExport { id: k + 1, x: p[0], y: p[1] })
                    .collect(),
                links: topo.edges().into_iter().map(|(a, b)| [a + 1, b + 1]).collect(),
                models: sim.models().models().rows().into_iter().map(|r| r.to_vec()).collect(),
                assignment: sim.models().assignment().iter().map(|j| j + 1).collect(),
            };
            serde_json::to_writer_pretty(File::create(dir.join(format!("topology_{t:03}.json")))?, &export)?;
        }
    }
    Ok(())
}

fn report(label: &str, out: &MonteCarloOutput) {
    let s = &out.summary;
    print!(
        "{label}: trials={} successes={} rate={:.3} divergences={}",
        s.n_trials, s.successes, s.success_rate, s.divergences
    );
    if s.mode == Mode::Mobile {
        print!(" captures={}", s.captures);
    }
    println!();
}

fn run(cli: Cli) -> mtdecide::Result<()> {
    match cli.command {
        Command::Decide(args) => single(Mode::Decide, &args),
        Command::Follow(args) => single(Mode::Follow, &args),
        Command::Mobile(args) => single(Mode::Mobile, &args),
        Command::Sweep { models, mode, run } => {
            let mode = match mode.as_str() {
                "decide" => Mode::Decide,
                "follow" => Mode::Follow,
                "mobile" => Mode::Mobile,
                other => return Err(Error::Config(format!("unknown mode {other:?}"))),
            };
            let config = run.config(mode)?;
            for &c in &models {
                ExperimentConfig { n_models: c, ..config.clone() }.validate()?;
            }
            let results = sweep(&config, &models, !run.serial)?;
            let mut table = Vec::new();
            for (c, out) in &results {
                report(&format!("{mode} C={c}"), out);
                let cfg = ExperimentConfig { n_models: *c, ..config.clone() };
                if let Some(dir) = &config.output_dir {
                    write_outputs(&cfg, out, &dir.join(format!("c{c}")), &run)?;
                }
                table.push(serde_json::json!({
                    "n_models": c,
                    "successes": out.summary.successes,
                    "success_rate": out.summary.success_rate,
                }));
            }
            if let Some(dir) = &config.output_dir {
                fs::create_dir_all(dir)?;
                serde_json::to_writer_pretty(File::create(dir.join("sweep.json"))?, &table)?;
            }
            Ok(())
        }
    }
}

fn single(mode: Mode, args: &RunArgs) -> mtdecide::Result<()> {
    let config = args.config(mode)?;
    let out = run_monte_carlo(&config, !args.serial)?;
    report(&mode.to_string(), &out);
    if let Some(dir) = &config.output_dir {
        write_outputs(&config, &out, dir, args)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Toml(_) | Error::InfeasibleTopology { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
