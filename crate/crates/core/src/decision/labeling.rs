use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::models::sq_dist;
use crate::network::Topology;

/// Agents of one neighborhood that share a column of `Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelClass {
    pub label: u128,
    /// Global agent indices, ascending.
    pub members: Vec<usize>,
}

/// Agent `k`'s view of which desired models its neighbors follow.
///
/// Rows and columns of `y` follow `neighbors`, the closed neighborhood in
/// ascending global order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelView {
    pub agent: usize,
    pub neighbors: Vec<usize>,
    pub y: Array2<u8>,
    /// Label of each neighbor, aligned with `neighbors`.
    pub labels: Vec<u128>,
    /// Label classes ordered by their lowest member.
    pub classes: Vec<LabelClass>,
    /// Index into `classes` of the majority set `Q_{k,i}`.
    pub majority: usize,
}

impl LabelView {
    /// `C_k(i)`, the number of distinct desired models in the neighborhood.
    pub fn model_count(&self) -> usize {
        self.classes.len()
    }

    pub fn majority_set(&self) -> &[usize] {
        &self.classes[self.majority].members
    }

    pub fn in_majority(&self) -> bool {
        self.majority_set().binary_search(&self.agent).is_ok()
    }

    pub fn self_index(&self) -> usize {
        self.neighbors
            .binary_search(&self.agent)
            .expect("closed neighborhood contains the agent")
    }

    /// Row `k` of `Y` is all ones.
    pub fn fully_agreed(&self) -> bool {
        self.y.row(self.self_index()).iter().all(|&v| v == 1)
    }

    pub fn label_of(&self, agent: usize) -> Option<u128> {
        self.neighbors
            .binary_search(&agent)
            .ok()
            .map(|i| self.labels[i])
    }
}

/// Reads a binary column most-significant-bit first.
pub fn column_label(bits: impl IntoIterator<Item = u8>) -> u128 {
    bits.into_iter()
        .fold(0u128, |acc, b| (acc << 1) | u128::from(b & 1))
}

/// Builds `Y^k` from pairwise `beta`-tests on the previous desired estimates,
/// labels each column, and finds the largest label class.
///
/// Ties for the largest class go to the class containing `k`, otherwise to
/// the class with the lowest member.
pub fn build_label_view(k: usize, w_prev: &Array2<f64>, topology: &Topology, beta: f64) -> LabelView {
    let neighbors = topology.neighbors(k).to_vec();
    let n = neighbors.len();
    assert!(n <= 128, "labels hold at most 128 neighbors");
    let mut y = Array2::<u8>::zeros((n, n));
    for a in 0..n {
        y[[a, a]] = 1;
        for b in (a + 1)..n {
            let close = sq_dist(w_prev.row(neighbors[a]), w_prev.row(neighbors[b])) <= beta;
            y[[a, b]] = u8::from(close);
            y[[b, a]] = u8::from(close);
        }
    }
    let labels: Vec<u128> = (0..n).map(|c| column_label(y.column(c).iter().copied())).collect();

    let mut classes: Vec<LabelClass> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match classes.iter_mut().find(|c| c.label == label) {
            Some(class) => class.members.push(neighbors[i]),
            None => classes.push(LabelClass {
                label,
                members: vec![neighbors[i]],
            }),
        }
    }

    let majority = (0..classes.len())
        .max_by(|&a, &b| {
            let (ca, cb) = (&classes[a], &classes[b]);
            ca.members
                .len()
                .cmp(&cb.members.len())
                .then_with(|| ca.members.contains(&k).cmp(&cb.members.contains(&k)))
                // lower first member wins, so it must compare as greater
                .then_with(|| cb.members[0].cmp(&ca.members[0]))
        })
        .expect("neighborhood is nonempty");

    LabelView {
        agent: k,
        neighbors,
        y,
        labels,
        classes,
        majority,
    }
}

/// `p_k(i)`: the fraction of the closed neighborhood sharing `k`'s desired model.
pub fn agreement_degree(view: &LabelView) -> f64 {
    let row = view.y.row(view.self_index());
    row.iter().map(|&v| f64::from(v)).sum::<f64>() / view.neighbors.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// The six-agent neighborhood with desired models k,n,q / l,m / o,
    /// written as agents 0..6 in that order.
    fn six_agent_example() -> (Topology, Array2<f64>) {
        let edges: Vec<_> = (1..6).map(|l| (0, l)).collect();
        let t = Topology::from_edges(6, &edges, vec![[0.0; 2]; 6]);
        let g = [0.5, 0.5];
        let r = [-0.5, 0.5];
        let b = [0.0, -0.6];
        let w = array![g, r, r, g, b, g];
        (t, w)
    }

    #[test]
    fn worked_labels() {
        assert_eq!(column_label([1, 0, 0, 1, 0, 1]), 37);
        assert_eq!(column_label([0, 1, 1, 0, 0, 0]), 24);
        assert_eq!(column_label([0, 0, 0, 0, 1, 0]), 2);
        assert_eq!(column_label([0, 0, 0, 0, 0, 0]), 0);
    }

    #[test]
    fn six_agent_view() {
        let (t, w) = six_agent_example();
        let v = build_label_view(0, &w, &t, 0.08);
        let expected_y = array![
            [1, 0, 0, 1, 0, 1],
            [0, 1, 1, 0, 0, 0],
            [0, 1, 1, 0, 0, 0],
            [1, 0, 0, 1, 0, 1],
            [0, 0, 0, 0, 1, 0],
            [1, 0, 0, 1, 0, 1]
        ];
        assert_eq!(v.y, expected_y);
        // agent k is listed first here, so the labels match the worked values
        assert_eq!(v.labels, vec![37, 24, 24, 37, 2, 37]);
        assert_eq!(v.model_count(), 3);
        assert_eq!(v.majority_set(), &[0, 3, 5]);
        assert!(v.in_majority());
        assert_eq!(agreement_degree(&v), 0.5);
    }

    #[test]
    fn all_close_is_one_class() {
        let t = Topology::from_edges(6, &(1..6).map(|l| (0, l)).collect::<Vec<_>>(), vec![[0.0; 2]; 6]);
        let w = Array2::from_elem((6, 2), 0.3);
        let v = build_label_view(0, &w, &t, 0.08);
        assert!(v.y.iter().all(|&x| x == 1));
        assert_eq!(v.model_count(), 1);
        assert_eq!(agreement_degree(&v), 1.0);
        assert!(v.fully_agreed());
    }

    #[test]
    fn identity_y_gives_quarter() {
        let t = Topology::from_edges(4, &[(0, 1), (0, 2), (0, 3)], vec![[0.0; 2]; 4]);
        let w = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let v = build_label_view(0, &w, &t, 0.08);
        assert_eq!(v.model_count(), 4);
        assert_eq!(agreement_degree(&v), 0.25);
        // four singletons: the tie goes to k's own class
        assert_eq!(v.majority_set(), &[0]);
    }

    #[test]
    fn tie_without_k_goes_to_lowest_member() {
        // k=0 alone; {1,2} and {3,4} tie
        let t = Topology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], vec![[0.0; 2]; 5]);
        let w = array![[5.0, 5.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let v = build_label_view(0, &w, &t, 0.08);
        assert_eq!(v.majority_set(), &[1, 2]);
        assert!(!v.in_majority());
    }
}
