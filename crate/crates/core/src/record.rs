//! Run records and their on-disk formats.
//!
//! A run is written as two files: a CSV with one row per iteration
//!
//! ```text
//! iter,msd_1,...,msd_C,msd_d,distinct_desired,all_agreed[,coverage]
//! ```
//!
//! where `msd_d` (and any `msd_j` for an unobserved model) is blank when
//! undefined, `all_agreed` is `0`/`1` and `coverage` appears in follow mode;
//! and a JSON document holding everything else in [`RunRecord`]. Agent and
//! model indices in both files are one-based.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iter: usize,
    /// `MSD_j` per model, `None` for models with no observers.
    pub msd: Vec<Option<f64>>,
    /// Present only in rounds where every agent is in full agreement.
    pub msd_d: Option<f64>,
    pub distinct_desired: usize,
    pub all_agreed: bool,
    /// Agents holding an anchor source (follow mode).
    pub coverage: Option<usize>,
}

/// Agent position at one iteration, for mobile runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    /// One-based.
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    /// One-based model nearest to the agent's desired estimate.
    pub desired_label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub n_agents: usize,
    pub n_models: usize,
    pub beta: f64,
    pub hold_window: usize,
    pub seed: u64,
    /// One-based designated agent in follow mode.
    pub target_agent: Option<usize>,
    /// Zero-based model the network must settle on, when prescribed.
    pub required_model: Option<usize>,
    /// Ground-truth models, one per row.
    pub models: Vec<Vec<f64>>,
    /// Zero-based model of each agent at the end of the run.
    pub assignment: Vec<usize>,
    #[serde(skip)]
    pub rows: Vec<IterationRow>,
    pub final_estimates: Vec<Vec<f64>>,
    pub final_agreement: Vec<f64>,
    pub switch_counts: Vec<u32>,
    pub source_changes: Option<Vec<u32>>,
    /// One-based model the network agreed on.
    pub final_label: Option<usize>,
    pub success: bool,
    pub decision_success: bool,
    /// One-based source every agent reached (mobile).
    pub captured: Option<usize>,
    pub final_positions: Option<Vec<[f64; 2]>>,
    /// Largest agent speed seen during the run (mobile).
    pub peak_speed: Option<f64>,
    /// Set when the run was cut short, e.g. by the divergence guard.
    pub error: Option<String>,
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryPoint>,
}

impl RunRecord {
    pub fn empty(mode: Mode, n_agents: usize, n_models: usize, beta: f64, hold_window: usize) -> Self {
        Self {
            mode,
            n_agents,
            n_models,
            beta,
            hold_window,
            seed: 0,
            target_agent: None,
            required_model: None,
            models: Vec::new(),
            assignment: Vec::new(),
            rows: Vec::new(),
            final_estimates: Vec::new(),
            final_agreement: Vec::new(),
            switch_counts: vec![0; n_agents],
            source_changes: None,
            final_label: None,
            success: false,
            decision_success: false,
            captured: None,
            final_positions: None,
            peak_speed: None,
            error: None,
            wall_time_secs: 0.0,
            trajectory: Vec::new(),
        }
    }

    pub fn total_switches(&self) -> u64 {
        self.switch_counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Iterations at which `MSD_d` is defined.
    pub fn msd_d_series(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows.iter().filter_map(|r| r.msd_d.map(|v| (r.iter, v)))
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Rebuilds a record from its JSON document and iteration CSV.
    pub fn from_parts<J: Read, C: Read>(json: J, csv: C) -> Result<Self> {
        let mut record: RunRecord = serde_json::from_reader(json)?;
        record.rows = read_rows_csv(csv)?;
        Ok(record)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Writes the per-iteration CSV for `n_models` models.
pub fn write_rows_csv<W: Write>(rows: &[IterationRow], n_models: usize, out: W) -> Result<()> {
    let with_coverage = rows.iter().any(|r| r.coverage.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend((1..=n_models).map(|j| format!("msd_{j}")));
    header.extend(["msd_d", "distinct_desired", "all_agreed"].map(String::from));
    if with_coverage {
        header.push("coverage".into());
    }
    w.write_record(&header)?;
    for r in rows {
        if r.msd.len() != n_models {
            return Err(Error::Parse(format!(
                "row {} has {} MSD columns, expected {n_models}",
                r.iter,
                r.msd.len()
            )));
        }
        let mut fields = vec![r.iter.to_string()];
        fields.extend(r.msd.iter().map(|&m| fmt_opt(m)));
        fields.push(fmt_opt(r.msd_d));
        fields.push(r.distinct_desired.to_string());
        fields.push(u8::from(r.all_agreed).to_string());
        if with_coverage {
            fields.push(r.coverage.map(|c| c.to_string()).unwrap_or_default());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} {s:?}")))
}

fn parse_opt(s: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(s, what, line).map(Some)
    }
}

/// Parses a CSV written by [`write_rows_csv`].
pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<IterationRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let n_models = header.iter().filter(|h| h.starts_with("msd_") && *h != "msd_d").count();
    let with_coverage = header.iter().any(|h| h == "coverage");
    let expected = 1 + n_models + 3 + usize::from(with_coverage);
    if header.len() != expected || header.get(0) != Some("iter") {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let msd = (0..n_models)
            .map(|j| parse_opt(&rec[1 + j], "msd", line))
            .collect::<Result<Vec<_>>>()?;
        let base = 1 + n_models;
        let agreed: u8 = parse_field(&rec[base + 2], "all_agreed", line)?;
        rows.push(IterationRow {
            iter: parse_field(&rec[0], "iter", line)?,
            msd,
            msd_d: parse_opt(&rec[base], "msd_d", line)?,
            distinct_desired: parse_field(&rec[base + 1], "distinct_desired", line)?,
            all_agreed: agreed == 1,
            coverage: if with_coverage {
                let s = &rec[base + 3];
                if s.is_empty() {
                    None
                } else {
                    Some(parse_field(s, "coverage", line)?)
                }
            } else {
                None
            },
        });
    }
    Ok(rows)
}

/// `iter,agent,x,y,desired_label`.
pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryPoint>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_row(n_models: usize, with_cov: bool) -> impl Strategy<Value = IterationRow> {
        (
            0usize..100_000,
            proptest::collection::vec(proptest::option::of(0.0f64..1e3), n_models),
            proptest::option::of(any::<f64>().prop_filter("finite", |x| x.is_finite() && *x >= 0.0)),
            1usize..80,
            any::<bool>(),
            proptest::option::of(0usize..80),
        )
            .prop_map(move |(iter, msd, msd_d, distinct, agreed, cov)| IterationRow {
                iter,
                msd,
                msd_d,
                distinct_desired: distinct,
                all_agreed: agreed,
                coverage: if with_cov { Some(cov.unwrap_or(0)) } else { None },
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in (1usize..6, any::<bool>()).prop_flat_map(|(c, cov)| {
                (Just(c), proptest::collection::vec(arb_row(c, cov), 0..20))
            })
        ) {
            let (c, rows) = rows;
            let mut buf = Vec::new();
            write_rows_csv(&rows, c, &mut buf).unwrap();
            let back = read_rows_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }

    #[test]
    fn header_layout() {
        let rows = vec![IterationRow {
            iter: 1,
            msd: vec![Some(0.5), None],
            msd_d: None,
            distinct_desired: 2,
            all_agreed: false,
            coverage: None,
        }];
        let mut buf = Vec::new();
        write_rows_csv(&rows, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,msd_1,msd_2,msd_d,distinct_desired,all_agreed\n1,5e-1,,,2,0\n"
        );
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let bad = "iter,msd_1,msd_d,distinct_desired,all_agreed\n1,abc,,1,0\n";
        assert!(matches!(read_rows_csv(bad.as_bytes()), Err(Error::Parse(_))));
        let bad = "step,msd_1\n1,2\n";
        assert!(read_rows_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let pts = vec![
            TrajectoryPoint { iter: 1, agent: 1, x: 0.25, y: -3.5, desired_label: 2 },
            TrajectoryPoint { iter: 200, agent: 80, x: 49.0, y: 1e-3, desired_label: 4 },
        ];
        let mut buf = Vec::new();
        write_trajectory_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("iter,agent,x,y,desired_label\n"));
        assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), pts);
    }
}
