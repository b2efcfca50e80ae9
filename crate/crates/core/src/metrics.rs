//! Mean-square deviations and the success verdict.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::models::{sq_dist, ModelSet};
use crate::record::RunRecord;

/// `MSD_j = (1/|C_j|) sum_{k in C_j} ||z_j - phi_k||^2` for every model `j`;
/// `None` for models nobody observes.
pub fn msd_observed(phi: &Array2<f64>, models: &ModelSet) -> Vec<Option<f64>> {
    let mut sums = vec![0.0; models.n_models()];
    let mut counts = vec![0usize; models.n_models()];
    for k in 0..phi.nrows() {
        let j = models.model_of(k);
        sums[j] += sq_dist(models.model(j), phi.row(k));
        counts[j] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// `MSD_d = (1/N) sum_k ||z_d - w_k||^2`.
pub fn msd_desired(w: &Array2<f64>, z_d: ArrayView1<'_, f64>) -> f64 {
    let n = w.nrows();
    w.rows().into_iter().map(|row| sq_dist(z_d, row)).sum::<f64>() / n as f64
}

/// Network mean of the rows of `w`.
pub fn mean_row(w: &Array2<f64>) -> ndarray::Array1<f64> {
    w.mean_axis(ndarray::Axis(0)).expect("at least one agent")
}

/// Number of groups of desired estimates, counting connected components of
/// the graph linking every pair within `beta` in squared norm.
pub fn distinct_desired(w: &Array2<f64>, beta: f64) -> usize {
    let n = w.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if sq_dist(w.row(a), w.row(b)) <= beta {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    (0..n).filter(|&x| find(&mut parent, x) == x).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
    /// Zero-based model every final estimate sits on, when there is one.
    pub model: Option<usize>,
}

/// Success means the last `record.hold_window` rounds were in full agreement
/// and every final estimate lies within `beta` of one common model (which
/// must be `record.required_model` when set).
pub fn evaluate_success(record: &RunRecord, models: &ModelSet, beta: f64) -> Verdict {
    let model = common_model(&record.final_estimates, models, beta);
    let hold = record.hold_window;
    let held = record.rows.len() >= hold
        && record.rows[record.rows.len() - hold..]
            .iter()
            .all(|r| r.all_agreed);
    let required_ok = match record.required_model {
        Some(r) => model == Some(r),
        None => true,
    };
    Verdict {
        success: record.error.is_none() && held && model.is_some() && required_ok,
        model,
    }
}

/// The model every estimate is within `beta` of, if any.
pub fn common_model(estimates: &[Vec<f64>], models: &ModelSet, beta: f64) -> Option<usize> {
    let first = estimates.first()?;
    let (j, _) = models.nearest(ArrayView1::from(first.as_slice()));
    estimates
        .iter()
        .all(|w| sq_dist(models.model(j), ArrayView1::from(w.as_slice())) <= beta)
        .then_some(j)
}

/// The source every agent is within `radius` of, if any.
pub fn captured(positions: &[[f64; 2]], models: &ModelSet, radius: f64) -> Option<usize> {
    let r2 = radius * radius;
    (0..models.n_models()).find(|&j| {
        let z = models.model(j);
        positions.iter().all(|p| {
            let dx = p[0] - z[0];
            let dy = p[1] - z[1];
            dx * dx + dy * dy <= r2
        })
    })
}

/// Power ratio in decibels.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Median of the finite values, `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Linear-interpolated percentile, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;
    use crate::record::IterationRow;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn msd_zero_on_models() {
        let models = ModelSet::new(array![[0.1, 0.2], [0.7, -0.3]], vec![0, 1, 1]);
        let phi = array![[0.1, 0.2], [0.7, -0.3], [0.7, -0.3]];
        assert_eq!(msd_observed(&phi, &models), vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn msd_by_hand() {
        let models = ModelSet::new(array![[0.0, 0.0]], vec![0]);
        assert_eq!(msd_observed(&array![[1.0, 0.0]], &models), vec![Some(1.0)]);

        let models = ModelSet::new(array![[0.0, 0.0]], vec![0, 0]);
        let phi = array![[0.1, 0.0], [0.0, 0.03f64.sqrt()]];
        assert_abs_diff_eq!(msd_observed(&phi, &models)[0].unwrap(), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn msd_missing_for_empty_cluster() {
        let models = ModelSet::new(array![[0.0, 0.0], [1.0, 1.0]], vec![0]);
        assert_eq!(msd_observed(&array![[0.0, 0.0]], &models), vec![Some(0.0), None]);
    }

    #[test]
    fn msd_desired_by_hand() {
        let z = array![0.5, 0.5];
        let w = array![[0.5, 0.5], [0.5, 0.5]];
        assert_eq!(msd_desired(&w, z.view()), 0.0);
        let w = array![[0.5 + 0.02f64.sqrt(), 0.5], [0.5, 0.5]];
        assert_abs_diff_eq!(msd_desired(&w, z.view()), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn distinct_groups() {
        let w = array![[0.0, 0.0], [0.1, 0.0], [1.0, 1.0], [5.0, 5.0]];
        assert_eq!(distinct_desired(&w, 0.08), 3);
        assert_eq!(distinct_desired(&w, 100.0), 1);
    }

    fn record(rows_agreed: &[bool], finals: Vec<Vec<f64>>, required: Option<usize>) -> RunRecord {
        let mut r = RunRecord::empty(Mode::Decide, finals.len(), 2, 0.08, 3);
        r.rows = rows_agreed
            .iter()
            .enumerate()
            .map(|(i, &a)| IterationRow {
                iter: i + 1,
                msd: vec![Some(0.0), Some(0.0)],
                msd_d: None,
                distinct_desired: 1,
                all_agreed: a,
                coverage: None,
            })
            .collect();
        r.final_estimates = finals;
        r.required_model = required;
        r
    }

    #[test]
    fn success_on_common_model() {
        let models = ModelSet::new(array![[0.5, 0.5], [-0.5, -0.5]], vec![0, 1]);
        let r = record(&[false, true, true, true], vec![vec![-0.5, -0.5]; 2], None);
        let v = evaluate_success(&r, &models, 0.08);
        assert!(v.success);
        assert_eq!(v.model, Some(1));

        let r = record(&[true; 4], vec![vec![0.5, 0.5], vec![-0.5, -0.5]], None);
        assert!(!evaluate_success(&r, &models, 0.08).success);

        let r = record(&[true, true, false, true], vec![vec![0.5, 0.5]; 2], None);
        assert!(!evaluate_success(&r, &models, 0.08).success);

        let r = record(&[true; 4], vec![vec![0.5, 0.5]; 2], Some(1));
        assert!(!evaluate_success(&r, &models, 0.08).success);
    }

    #[test]
    fn capture_check() {
        let models = ModelSet::new(array![[0.0, 0.0], [40.0, 40.0]], vec![0]);
        assert_eq!(captured(&[[39.0, 41.0], [43.0, 40.0]], &models, 5.0), Some(1));
        assert_eq!(captured(&[[39.0, 41.0], [0.0, 1.0]], &models, 5.0), None);
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median([f64::NAN]), None);
        assert_eq!(percentile(&[0.0, 10.0], 0.5), 5.0);
        assert_abs_diff_eq!(db(100.0), 20.0);
    }
}
