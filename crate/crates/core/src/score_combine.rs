//! Combining per-reference scores into one score per hypothesis.
//!
//! The default policy takes the maximum over references, which lets any
//! single-reference metric (including externally computed neural ones) be
//! used with a reference set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CombinePolicy {
    #[default]
    Max,
    Mean,
    TopKMean {
        k: usize,
    },
}

impl CombinePolicy {
    pub fn name(&self) -> String {
        match self {
            CombinePolicy::Max => "max".into(),
            CombinePolicy::Mean => "mean".into(),
            CombinePolicy::TopKMean { k } => format!("top{k}_mean"),
        }
    }
}

/// Identifies one hypothesis: a system's output for a segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub system: String,
    pub segment: String,
}

impl RowKey {
    pub fn new(system: impl Into<String>, segment: impl Into<String>) -> Self {
        RowKey {
            system: system.into(),
            segment: segment.into(),
        }
    }
}

/// Scores of one hypothesis against each of its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub system: String,
    pub segment: String,
    pub scores: BTreeMap<String, f64>,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<[f64; 2]>,
}

impl ScoreRow {
    pub fn key(&self) -> RowKey {
        RowKey::new(&self.system, &self.segment)
    }
}

/// Per-(hypothesis, reference) scores from a single metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    metric_name: String,
    scale: Option<[f64; 2]>,
    rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    /// Validates rows: at least one, unique keys, a single metric name,
    /// non-empty and finite cells.
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("score matrix has no rows"))?;
        let metric_name = first.metric.clone();
        let scale = first.scale;
        let mut seen = BTreeSet::new();
        for row in &rows {
            if row.metric != metric_name {
                return Err(Error::invalid(format!(
                    "score matrix mixes metrics {metric_name:?} and {:?}",
                    row.metric
                )));
            }
            if !seen.insert(row.key()) {
                return Err(Error::invalid(format!(
                    "duplicate row ({}, {})",
                    row.system, row.segment
                )));
            }
            if row.scores.is_empty() {
                return Err(Error::invalid(format!(
                    "row ({}, {}) has no scores",
                    row.system, row.segment
                )));
            }
            if let Some((id, v)) = row.scores.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "row ({}, {}) reference {id}: non-finite score {v}",
                    row.system, row.segment
                )));
            }
        }
        Ok(ScoreMatrix {
            metric_name,
            scale,
            rows,
        })
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn scale(&self) -> Option<[f64; 2]> {
        self.scale
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<ScoreRow> {
        self.rows
    }
}

pub fn combine_row(scores: &[f64], policy: CombinePolicy) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot combine an empty score list"));
    }
    match policy {
        CombinePolicy::Max => Ok(scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        CombinePolicy::Mean => Ok(scores.iter().sum::<f64>() / scores.len() as f64),
        CombinePolicy::TopKMean { k } => {
            if k == 0 || k > scores.len() {
                return Err(Error::invalid(format!(
                    "top-k mean needs 1 <= k <= {}, got {k}",
                    scores.len()
                )));
            }
            let mut sorted = scores.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            Ok(sorted[..k].iter().sum::<f64>() / k as f64)
        }
    }
}

pub fn combine_matrix(m: &ScoreMatrix, policy: CombinePolicy) -> Result<BTreeMap<RowKey, f64>> {
    m.rows
        .iter()
        .map(|row| {
            let scores: Vec<f64> = row.scores.values().copied().collect();
            let v = combine_row(&scores, policy).map_err(|e| {
                Error::invalid(format!("row ({}, {}): {e}", row.system, row.segment))
            })?;
            Ok((row.key(), v))
        })
        .collect()
}

/// Arithmetic mean over segments.
pub fn system_score<'a, I>(per_segment: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a f64>,
{
    let (sum, n) = per_segment
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::invalid("system score needs at least one segment"));
    }
    Ok(sum / n as f64)
}

/// Groups combined per-segment scores by system and averages each group.
pub fn system_scores(combined: &BTreeMap<RowKey, f64>) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (key, v) in combined {
        groups.entry(&key.system).or_default().push(*v);
    }
    groups
        .into_iter()
        .map(|(s, vals)| (s.to_string(), vals.iter().sum::<f64>() / vals.len() as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(system: &str, segment: &str, scores: &[(&str, f64)]) -> ScoreRow {
        ScoreRow {
            system: system.into(),
            segment: segment.into(),
            scores: scores.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            metric: "bleurt".into(),
            scale: None,
        }
    }

    #[test]
    fn combine_row_policies() {
        let s = [0.2, 0.8, 0.5];
        assert_eq!(combine_row(&s, CombinePolicy::Max).unwrap(), 0.8);
        assert!((combine_row(&s, CombinePolicy::Mean).unwrap() - 0.5).abs() < 1e-15);
        assert!((combine_row(&s, CombinePolicy::TopKMean { k: 2 }).unwrap() - 0.65).abs() < 1e-15);
        assert!(combine_row(&[], CombinePolicy::Max).is_err());
        assert!(combine_row(&s, CombinePolicy::TopKMean { k: 0 }).is_err());
        assert!(combine_row(&s, CombinePolicy::TopKMean { k: 4 }).is_err());
    }

    #[test]
    fn combine_matrix_rows() {
        let m = ScoreMatrix::new(vec![
            row("A", "1", &[("r0", 0.1), ("r1", 0.7), ("r2", 0.3)]),
            row("A", "2", &[("r0", 0.9), ("r1", 0.2), ("r2", 0.4)]),
        ])
        .unwrap();
        let out = combine_matrix(&m, CombinePolicy::Max).unwrap();
        assert_eq!(out[&RowKey::new("A", "1")], 0.7);
        assert_eq!(out[&RowKey::new("A", "2")], 0.9);
        assert_eq!(out.len(), 2);

        let single = ScoreMatrix::new(vec![row("A", "1", &[("r0", 0.3)]), row("B", "1", &[("r0", 0.6)])]).unwrap();
        for p in [CombinePolicy::Max, CombinePolicy::Mean, CombinePolicy::TopKMean { k: 1 }] {
            let out = combine_matrix(&single, p).unwrap();
            assert_eq!(out[&RowKey::new("A", "1")], 0.3);
            assert_eq!(out[&RowKey::new("B", "1")], 0.6);
        }
    }

    #[test]
    fn matrix_validation() {
        assert!(ScoreMatrix::new(vec![]).is_err());
        assert!(ScoreMatrix::new(vec![row("A", "1", &[("r", 1.0)]), row("A", "1", &[("r", 2.0)])]).is_err());
        assert!(ScoreMatrix::new(vec![row("A", "1", &[("r", f64::NAN)])]).is_err());
        assert!(ScoreMatrix::new(vec![row("A", "1", &[])]).is_err());
        let mut other = row("B", "1", &[("r", 1.0)]);
        other.metric = "comet".into();
        assert!(ScoreMatrix::new(vec![row("A", "1", &[("r", 1.0)]), other]).is_err());
    }

    #[test]
    fn system_level_mean() {
        let m: BTreeMap<String, f64> = [("s1".to_string(), 0.4), ("s2".to_string(), 0.6)].into();
        assert!((system_score(m.values()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(system_score([0.3].iter()).unwrap(), 0.3);
        assert!(system_score(std::iter::empty()).is_err());

        let combined: BTreeMap<RowKey, f64> = [
            (RowKey::new("A", "1"), 1.0),
            (RowKey::new("A", "2"), 3.0),
            (RowKey::new("B", "1"), 5.0),
        ]
        .into();
        let sys = system_scores(&combined);
        assert_eq!(sys["A"], 2.0);
        assert_eq!(sys["B"], 5.0);
    }
}
