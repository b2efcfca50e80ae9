//! Per-round structural checks, usable as a [`RoundObserver`].

use ndarray::Array2;

use crate::diffusion::round_belief;
use crate::sim::{RoundObserver, RoundView};

/// Tolerance on column sums of the weight matrices.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Collects violations instead of panicking so a test can report all of them.
#[derive(Debug, Default, Clone)]
pub struct InvariantChecker {
    pub rounds: usize,
    pub violations: Vec<String>,
    /// Skip the anchor-coverage check (time-varying topologies).
    pub skip_coverage: bool,
}

impl InvariantChecker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn fail(&mut self, iter: usize, what: String) {
        // A broken invariant usually breaks every round; keep the report short.
        if self.violations.len() < 50 {
            self.violations.push(format!("round {iter}: {what}"));
        }
    }

    fn check(&mut self, v: &RoundView<'_>) {
        let i = v.iter;
        let n = v.topology.n_agents();

        for k in 0..n {
            let s = v.combination.column(k).sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                self.fail(i, format!("column {k} of A sums to {s}"));
            }
        }

        for k in 0..n {
            for l in 0..n {
                let (f, e) = (v.cluster.f[[l, k]], v.cluster.e[[l, k]]);
                if e != round_belief(f) {
                    self.fail(i, format!("e[{l},{k}] = {e} but f = {f}"));
                }
            }
        }

        let split = &v.desired.a_dot + &v.desired.a_ddot;
        for k in 0..n {
            let established = match v.anchor {
                Some(a) => a.source[k].is_some(),
                None => v.topology.neighbors(k).iter().any(|&l| v.desired.h[[l, k]] == 1),
            };
            if established {
                let s = split.column(k).sum();
                if (s - 1.0).abs() > COLUMN_SUM_TOL {
                    self.fail(i, format!("column {k} of A_dot + A_ddot sums to {s}"));
                }
            }
        }
        if let Some((l, k)) = overlap(&v.desired.a_dot, &v.desired.a_ddot) {
            self.fail(i, format!("A_dot and A_ddot both weigh ({l},{k})"));
        }

        for view in v.views {
            let y = &view.y;
            let m = y.nrows();
            for a in 0..m {
                if y[[a, a]] != 1 {
                    self.fail(i, format!("Y of agent {} has a zero diagonal", view.agent));
                }
                for b in 0..m {
                    if y[[a, b]] != y[[b, a]] {
                        self.fail(i, format!("Y of agent {} is not symmetric", view.agent));
                    }
                    let same_col = y.column(a) == y.column(b);
                    if same_col != (view.labels[a] == view.labels[b]) {
                        self.fail(i, format!("labels of agent {} disagree with Y", view.agent));
                    }
                }
            }
            let k = view.agent;
            let agreed = view.fully_agreed();
            let p_one = v.agreement[k] == 1.0;
            let class_is_hood = view
                .classes
                .iter()
                .any(|c| c.members.contains(&k) && c.members == view.neighbors);
            if agreed != p_one {
                self.fail(i, format!("p of agent {k} is {} but Y row all ones is {agreed}", v.agreement[k]));
            }
            if class_is_hood && !agreed {
                self.fail(i, format!("agent {k} shares a label with every neighbor but p < 1"));
            }
            if agreed && (v.switches[k].is_some() || v.w_switched.row(k) != v.w_prev.row(k)) {
                self.fail(i, format!("agent {k} switched while in full agreement"));
            }
        }

        if let (Some(anchor), false) = (v.anchor, self.skip_coverage) {
            let depths = v.topology.bfs_depths(anchor.target);
            for k in 0..n {
                let inside = depths[k].is_some_and(|d| d <= i);
                if anchor.source[k].is_some() != inside {
                    self.fail(i, format!("anchor coverage of agent {k} does not match BFS ball"));
                }
            }
        }
        self.rounds += 1;
    }
}

fn overlap(a: &Array2<f64>, b: &Array2<f64>) -> Option<(usize, usize)> {
    a.indexed_iter()
        .find(|&((l, k), &x)| x != 0.0 && b[[l, k]] != 0.0)
        .map(|(idx, _)| idx)
}

impl RoundObserver for InvariantChecker {
    fn observe(&mut self, round: &RoundView<'_>) {
        self.check(round);
    }
}
