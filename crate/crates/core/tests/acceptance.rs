//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test --release --test acceptance`; the Monte Carlo
//! criteria take about two minutes in a release build.

use std::process::ExitCode;
use std::time::Instant;

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtdecide::decision::{agreement_degree, build_label_view};
use mtdecide::harness::{run_trial_observed, sweep};
use mtdecide::invariants::InvariantChecker;
use mtdecide::metrics::{db, median};
use mtdecide::sim::NoObserver;
use mtdecide::{run_monte_carlo, ExperimentConfig, ModelSet, MonteCarloOutput, Simulation, Topology};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Median in dB of a band's mean curve over `range` (zero-based iterations).
fn floor_db(curve: &[Option<f64>], range: std::ops::Range<usize>) -> Option<f64> {
    median(curve[range].iter().flatten().map(|&x| db(x)))
}

fn table_one(results: &[(usize, MonteCarloOutput)]) -> Outcome {
    let ok = results.iter().all(|(_, out)| out.summary.successes >= 95);
    let rates: Vec<String> = results
        .iter()
        .map(|(c, out)| format!("C={c} {}/{}", out.summary.successes, out.summary.n_trials))
        .collect();
    outcome(ok, format!("decide success, need >= 95 each: {}", rates.join(", ")))
}

fn follow_agent() -> Outcome {
    let plain = run_monte_carlo(&ExperimentConfig::follow(), true).expect("follow runs");
    let cfg = ExperimentConfig {
        max_iters: 1200,
        reassign_at: vec![600],
        ..ExperimentConfig::follow()
    };
    let out = run_monte_carlo(&cfg, true).expect("follow runs");
    let s = &out.summary;
    let curve = &s.msd_d.mean;
    let pre = floor_db(curve, 499..599).unwrap_or(f64::NAN);
    let spike = curve[599].map(db).unwrap_or(f64::NAN);
    let post = floor_db(curve, 1149..1200).unwrap_or(f64::NAN);
    let pass = plain.summary.successes >= 98
        && s.successes >= 98
        && spike - pre >= 10.0
        && (post - pre).abs() <= 3.0;
    outcome(
        pass,
        format!(
            "follow C=4 m=10: {}/100 without reassignment, {}/100 with reassignment at 600 (need >= 98); \
             MSD_d pre {pre:.1} dB, spike {spike:.1} dB, floor by 1200 {post:.1} dB (need spike >= +10, floor within 3)",
            plain.summary.successes, s.successes
        ),
    )
}

fn learning_curves(out: &MonteCarloOutput) -> Outcome {
    let s = &out.summary;
    let iters = s.msd_d.mean.len();
    let tail = iters - 100..iters;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut best_floor = f64::INFINITY;
    for (j, band) in s.msd.iter().enumerate() {
        let start = band.mean[0].map(db).unwrap_or(f64::NAN);
        let floor = floor_db(&band.mean, tail.clone()).unwrap_or(f64::NAN);
        pass &= start - floor >= 20.0;
        best_floor = best_floor.min(floor);
        parts.push(format!("MSD_{} {start:.1} -> {floor:.1} dB", j + 1));
    }
    let d_floor = floor_db(&s.msd_d.mean, tail).unwrap_or(f64::NAN);
    pass &= (d_floor - best_floor).abs() <= 6.0;
    outcome(
        pass,
        format!(
            "C=3: {} (need >= 20 dB drop); MSD_d floor {d_floor:.1} dB vs best MSD_j floor {best_floor:.1} dB (need within 6)",
            parts.join(", ")
        ),
    )
}

/// Largest class of the relation "same closeness to every member", found by
/// comparing each pair of agents over the whole neighborhood.
struct OracleView {
    classes: Vec<Vec<usize>>,
    majority: Vec<usize>,
    p: f64,
}

fn oracle(k: usize, hood: &[usize], w: &Array2<f64>, beta: f64) -> OracleView {
    let close = |a: usize, b: usize| {
        let d: f64 = w.row(a).iter().zip(w.row(b)).map(|(x, y)| (x - y) * (x - y)).sum();
        a == b || d <= beta
    };
    let equivalent = |a: usize, b: usize| hood.iter().all(|&x| close(a, x) == close(b, x));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &a in hood {
        match classes.iter_mut().find(|c| equivalent(c[0], a)) {
            Some(c) => c.push(a),
            None => classes.push(vec![a]),
        }
    }
    let size = classes.iter().map(Vec::len).max().unwrap();
    let largest: Vec<&Vec<usize>> = classes.iter().filter(|c| c.len() == size).collect();
    let majority = largest
        .iter()
        .find(|c| c.contains(&k))
        .or_else(|| largest.iter().min_by_key(|c| c[0]))
        .map(|c| (*c).clone())
        .unwrap();
    let p = hood.iter().filter(|&&x| close(k, x)).count() as f64 / hood.len() as f64;
    OracleView { classes, majority, p }
}

fn labeling_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let beta = 0.08;
    let mut mismatches = Vec::new();
    for instance in 0..1000 {
        let n = rng.random_range(2..=6);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .filter(|_| rng.random_bool(0.6))
            .collect();
        let topo = Topology::from_edges(n, &edges, vec![[0.0; 2]; n]);
        // Eighths are exact in binary; a coarse grid makes ties and near-ties common.
        let w = Array2::from_shape_fn((n, 2), |_| f64::from(rng.random_range(-3..=3)) / 8.0);
        for k in 0..n {
            let view = build_label_view(k, &w, &topo, beta);
            let want = oracle(k, topo.neighbors(k), &w, beta);
            let mut got: Vec<Vec<usize>> = view.classes.iter().map(|c| c.members.clone()).collect();
            let mut expected = want.classes.clone();
            got.sort();
            expected.sort();
            if got != expected
                || view.model_count() != want.classes.len()
                || view.majority_set() != want.majority.as_slice()
                || agreement_degree(&view) != want.p
            {
                mismatches.push(format!("instance {instance} agent {k}"));
            }
        }
    }

    // k, l, m, n, o, q = agents 0..6 around k; k, n, q share one model, l, m another.
    let star: Vec<(usize, usize)> = (1..6).map(|b| (0, b)).collect();
    let topo = Topology::from_edges(6, &star, vec![[0.0; 2]; 6]);
    let w = array![[0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5], [0.5, 0.5], [0.0, -0.5], [0.5, 0.5]];
    let view = build_label_view(0, &w, &topo, beta);
    let classes: Vec<Vec<usize>> = view.classes.iter().map(|c| c.members.clone()).collect();
    let example_ok = classes == vec![vec![0, 3, 5], vec![1, 2], vec![4]]
        && view.majority_set() == [0, 3, 5]
        && agreement_degree(&view) == 0.5;

    outcome(
        mismatches.is_empty() && example_ok,
        format!(
            "1000 random instances, {} mismatching agent views{}; worked example classes {:?}, p_k = {}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default(),
            classes,
            agreement_degree(&view)
        ),
    )
}

fn invariant_suite() -> Outcome {
    let mut runs = Vec::new();
    let decide = ExperimentConfig {
        max_iters: 400,
        ..ExperimentConfig::decide()
    };
    let follow = ExperimentConfig {
        max_iters: 400,
        reassign_at: vec![200],
        ..ExperimentConfig::follow()
    };
    let mobile = ExperimentConfig {
        max_iters: 300,
        ..ExperimentConfig::mobile()
    };
    for (name, cfg) in [("decide", &decide), ("follow", &follow), ("mobile", &mobile)] {
        for trial in 0..3 {
            let mut check = InvariantChecker::new();
            run_trial_observed(cfg, trial, &mut check).expect("trial runs");
            runs.push((name, trial, check));
        }
    }
    let rounds: usize = runs.iter().map(|(_, _, c)| c.rounds).sum();
    let bad: Vec<String> = runs
        .iter()
        .filter(|(_, _, c)| !c.is_clean())
        .map(|(name, t, c)| format!("{name} trial {t}: {}", c.violations[0]))
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "{} runs, {rounds} rounds checked, {} with violations{}",
            runs.len(),
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

/// Two cliques of six joined by two links. Every agent is in its local
/// majority, so without random copying neither side ever moves.
fn deadlock(seed: u64, breaking: bool) -> (bool, bool) {
    let mut edges = Vec::new();
    for base in [0, 6] {
        for a in 0..6 {
            for b in (a + 1)..6 {
                edges.push((base + a, base + b));
            }
        }
    }
    edges.extend([(5, 6), (4, 7)]);
    let topo = Topology::from_edges(12, &edges, vec![[0.0; 2]; 12]);
    let models = ModelSet::new(array![[0.5, 0.5], [-0.5, -0.5]], [vec![0; 6], vec![1; 6]].concat());
    let cfg = ExperimentConfig {
        n_agents: 12,
        max_iters: 2000,
        equilibrium_breaking: breaking,
        ..ExperimentConfig::decide()
    };
    let r = Simulation::decide(&cfg, topo, models, seed)
        .unwrap()
        .run(&mut NoObserver)
        .unwrap();
    (r.success, r.rows.iter().any(|row| row.all_agreed))
}

fn equilibrium_breaking() -> Outcome {
    let off: Vec<(bool, bool)> = (0..100).map(|s| deadlock(s, false)).collect();
    let on: Vec<(bool, bool)> = (0..100).map(|s| deadlock(s, true)).collect();
    let off_agreed = off.iter().filter(|(_, any)| *any).count();
    let on_success = on.iter().filter(|(ok, _)| *ok).count();
    outcome(
        off_agreed == 0 && on_success >= 95,
        format!(
            "two-clique deadlock, 2000 iterations: breaking off reached agreement in {off_agreed}/100 seeds (need 0), \
             breaking on reached consensus in {on_success}/100 (need >= 95)"
        ),
    )
}

fn mobile_convergence() -> Outcome {
    let cfg = ExperimentConfig::mobile();
    let out = run_monte_carlo(&cfg, true).expect("mobile runs");
    let cap = cfg.motion.max_speed;
    let peak = out
        .records
        .iter()
        .filter_map(|r| r.peak_speed)
        .fold(0.0, f64::max);
    let s = &out.summary;
    outcome(
        s.captures >= 90 && peak <= cap * (1.0 + 1e-12),
        format!(
            "80 agents, 4 sources: {} captures and {} full successes out of 100 (need >= 90 captures); \
             peak speed {peak:.4} vs cap {cap}",
            s.captures, s.successes
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig {
        n_trials: 8,
        max_iters: 400,
        ..ExperimentConfig::decide()
    };
    let json = |parallel: bool| serde_json::to_string(&run_monte_carlo(&cfg, parallel).unwrap().summary).unwrap();
    let serial = json(false);
    let again = json(false);
    let parallel = json(true);
    outcome(
        serial == again && serial == parallel,
        format!(
            "summary JSON ({} bytes): repeated run identical {}, serial vs parallel identical {}",
            serial.len(),
            serial == again,
            serial == parallel
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let decide = sweep(&ExperimentConfig::decide(), &[2, 3, 4, 5], true).expect("decide sweep runs");
    let c3 = &decide.iter().find(|(c, _)| *c == 3).unwrap().1;

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("success rates over C = 2..5", Box::new(|| table_one(&decide))),
        ("follow designated agent", Box::new(follow_agent)),
        ("MSD learning curves", Box::new(|| learning_curves(c3))),
        ("labeling oracle", Box::new(labeling_oracle)),
        ("invariant suite", Box::new(invariant_suite)),
        ("equilibrium breaking", Box::new(equilibrium_breaking)),
        ("mobile convergence", Box::new(mobile_convergence)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
