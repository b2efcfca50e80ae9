use rand::Rng;
use serde::{Deserialize, Serialize};

use super::labeling::LabelView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchCase {
    /// Outvoted: adopt the majority's desired model.
    Majority,
    /// Two camps left and `k` is in the larger: adopt a uniformly drawn neighbor's model.
    EquilibriumBreak,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchOutcome {
    pub case: SwitchCase,
    /// Agent whose previous estimate replaces `w_{k,i-1}`; `k` itself when kept.
    pub source: usize,
}

impl SwitchOutcome {
    /// The estimate actually changes hands.
    pub fn switched(&self, k: usize) -> bool {
        self.source != k
    }
}

/// Switching rule for an agent that is not in full agreement.
///
/// Outvoted agents copy the lowest-index member of the majority set. Agents in
/// the majority that see exactly two desired models copy a neighbor drawn
/// uniformly from the closed neighborhood when `equilibrium_breaking` is set,
/// which favours the more common model in proportion to its followers.
pub fn switch_decision<R: Rng + ?Sized>(
    view: &LabelView,
    equilibrium_breaking: bool,
    rng: &mut R,
) -> SwitchOutcome {
    let k = view.agent;
    if !view.in_majority() {
        return SwitchOutcome {
            case: SwitchCase::Majority,
            source: view.majority_set()[0],
        };
    }
    if equilibrium_breaking && view.model_count() == 2 {
        let pick = rng.random_range(0..view.neighbors.len());
        return SwitchOutcome {
            case: SwitchCase::EquilibriumBreak,
            source: view.neighbors[pick],
        };
    }
    SwitchOutcome {
        case: SwitchCase::Keep,
        source: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::build_label_view;
    use crate::network::Topology;
    use crate::rng;
    use ndarray::{array, Array2};

    fn star(n: usize) -> Topology {
        let edges: Vec<_> = (1..n).map(|l| (0, l)).collect();
        Topology::from_edges(n, &edges, vec![[0.0; 2]; n])
    }

    fn complete(n: usize) -> Topology {
        let edges: Vec<_> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        Topology::from_edges(n, &edges, vec![[0.0; 2]; n])
    }

    #[test]
    fn singleton_adopts_majority() {
        // desired models k,n,q / l,m / o as agents 0..6; o is agent 4
        let g = [0.5, 0.5];
        let r = [-0.5, 0.5];
        let w = array![g, r, r, g, [0.0, -0.6], g];
        let view = build_label_view(4, &w, &complete(6), 0.08);
        assert!(!view.in_majority());
        let mut rng = rng::rng_for(0, rng::SWITCH);
        let out = switch_decision(&view, true, &mut rng);
        assert_eq!(out.case, SwitchCase::Majority);
        assert_eq!(out.source, 0);
        assert!(out.switched(4));
    }

    #[test]
    fn three_camps_in_majority_keep() {
        let t = star(6);
        let w = array![[0.5, 0.5], [-0.5, 0.5], [0.0, -0.6], [0.5, 0.5], [0.5, 0.5], [-0.5, 0.5]];
        let view = build_label_view(0, &w, &t, 0.08);
        assert_eq!(view.model_count(), 3);
        assert!(view.in_majority());
        let mut rng = rng::rng_for(0, rng::SWITCH);
        let out = switch_decision(&view, true, &mut rng);
        assert_eq!(out.case, SwitchCase::Keep);
        assert!(!out.switched(0));
    }

    #[test]
    fn two_camps_without_breaking_keep() {
        let t = star(3);
        let w = array![[0.5, 0.5], [0.5, 0.5], [-0.5, -0.5]];
        let view = build_label_view(0, &w, &t, 0.08);
        let mut rng = rng::rng_for(0, rng::SWITCH);
        assert_eq!(switch_decision(&view, false, &mut rng).case, SwitchCase::Keep);
    }

    /// Four followers of X (including k) and two of Y: the drawn source lands
    /// on an X follower with probability 4/6.
    #[test]
    fn breaking_draw_follows_neighborhood_shares() {
        let t = star(6);
        let x = [0.5, 0.5];
        let y = [-0.5, -0.5];
        let w: Array2<f64> = array![x, x, y, x, y, x];
        let view = build_label_view(0, &w, &t, 0.08);
        assert_eq!(view.model_count(), 2);
        assert!(view.in_majority());
        let mut rng = rng::rng_for(17, rng::SWITCH);
        let draws = 10_000;
        let mut to_x = 0usize;
        for _ in 0..draws {
            let out = switch_decision(&view, true, &mut rng);
            assert_eq!(out.case, SwitchCase::EquilibriumBreak);
            if w[[out.source, 0]] > 0.0 {
                to_x += 1;
            }
        }
        let p = 4.0 / 6.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let expected = draws as f64 * p;
        assert!(
            (to_x as f64 - expected).abs() <= 3.0 * sigma,
            "{to_x} vs {expected} +- {}",
            3.0 * sigma
        );
    }
}
