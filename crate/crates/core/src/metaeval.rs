//! Agreement between metric scores and human judgments.
//!
//! System level: pairwise ranking accuracy and Pearson correlation.
//! Segment level: Kendall τ-b over all (system, segment) items of a language
//! pair pooled together. Per quality dimension: Spearman over pooled items.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_combine::RowKey;

pub const KENDALL_VARIANT: &str = "tau-b over pooled (system, segment) items";

/// A human quality score. `segment == None` marks a system-level judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanJudgment {
    pub system: String,
    #[serde(default)]
    pub segment: Option<String>,
    #[serde(default)]
    pub dimension: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAccuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub pairs_used: usize,
}

/// Sign agreement over unordered system pairs. Pairs tied under human
/// scores are left out; pairs tied under the metric count as wrong.
pub fn pairwise_accuracy(
    metric_scores: &BTreeMap<String, f64>,
    human_scores: &BTreeMap<String, f64>,
) -> Result<PairwiseAccuracy> {
    let common: Vec<(f64, f64)> = metric_scores
        .iter()
        .filter_map(|(sys, &m)| human_scores.get(sys).map(|&h| (m, h)))
        .collect();
    if common.len() < 2 {
        return Err(Error::invalid(format!(
            "pairwise accuracy needs at least 2 systems scored by both metric and humans, got {}",
            common.len()
        )));
    }
    let mut correct = 0;
    let mut pairs_used = 0;
    for i in 0..common.len() {
        for j in i + 1..common.len() {
            let human_delta = common[i].1 - common[j].1;
            if human_delta == 0.0 {
                continue;
            }
            pairs_used += 1;
            let metric_delta = common[i].0 - common[j].0;
            if metric_delta != 0.0 && metric_delta.signum() == human_delta.signum() {
                correct += 1;
            }
        }
    }
    if pairs_used == 0 {
        return Err(Error::degenerate(
            "all human system scores are tied; pairwise accuracy is undefined",
        ));
    }
    Ok(PairwiseAccuracy {
        accuracy: correct as f64 / pairs_used as f64,
        correct,
        pairs_used,
    })
}

fn check_paired(x: &[f64], y: &[f64], what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "{what}: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid(format!("{what} needs at least 2 observations")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite input")));
    }
    Ok(())
}

/// Sample Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "Pearson")?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("Pearson: an input has zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Number of tied pairs among equal runs of a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of strict inversions it contained.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall τ-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "Kendall")?;
    let n = x.len() as u64;
    let n0 = n * (n - 1) / 2;

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tx = tied_pairs(&xs);
    let txy = tied_pairs(&pairs);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = merge_count(&mut ys, &mut buf);
    let ty = tied_pairs(&ys);

    if tx == n0 || ty == n0 {
        return Err(Error::degenerate("Kendall: an input is entirely tied"));
    }
    let numerator = n0 as i64 - tx as i64 - ty as i64 + txy as i64 - 2 * discordant as i64;
    let denominator = ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt();
    Ok((numerator as f64 / denominator).clamp(-1.0, 1.0))
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "Spearman")?;
    pearson(&midranks(x), &midranks(y)).map_err(|e| match e {
        Error::Degenerate(_) => Error::degenerate("Spearman: an input has zero rank variance"),
        other => other,
    })
}

fn align<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .filter_map(|(k, &va)| b.get(k).map(|&vb| (va, vb)))
        .unzip()
}

/// Kendall τ-b over the (system, segment) items present in both maps.
pub fn segment_kendall(metric: &BTreeMap<RowKey, f64>, human: &BTreeMap<RowKey, f64>) -> Result<f64> {
    let (m, h) = align(metric, human);
    if m.len() < 2 {
        return Err(Error::invalid(format!(
            "segment-level Kendall needs at least 2 common (system, segment) items, got {}",
            m.len()
        )));
    }
    kendall_tau(&m, &h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageGapReport {
    pub system_a: String,
    pub system_b: String,
    pub delta_single: f64,
    pub delta_multi: f64,
    /// `delta_multi - delta_single`.
    pub shrinkage: f64,
    /// `delta_multi / delta_single`, absent when `delta_single == 0`.
    #[serde(default)]
    pub ratio: Option<f64>,
}

pub fn leakage_gap(
    scores_single: &BTreeMap<String, f64>,
    scores_multi: &BTreeMap<String, f64>,
    a: &str,
    b: &str,
) -> Result<LeakageGapReport> {
    let get = |m: &BTreeMap<String, f64>, s: &str, which: &str| {
        m.get(s)
            .copied()
            .ok_or_else(|| Error::invalid(format!("system {s:?} missing from {which}-reference scores")))
    };
    let delta_single = get(scores_single, a, "single")? - get(scores_single, b, "single")?;
    let delta_multi = get(scores_multi, a, "multi")? - get(scores_multi, b, "multi")?;
    Ok(LeakageGapReport {
        system_a: a.to_string(),
        system_b: b.to_string(),
        delta_single,
        delta_multi,
        shrinkage: delta_multi - delta_single,
        ratio: (delta_single != 0.0).then(|| delta_multi / delta_single),
    })
}

/// Metric scores for one language pair, at either level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricScores {
    pub system: BTreeMap<String, f64>,
    pub segment: BTreeMap<RowKey, f64>,
}

impl MetricScores {
    /// System scores, or the mean of each system's segment scores when none were given.
    pub fn system_level(&self) -> BTreeMap<String, f64> {
        if !self.system.is_empty() {
            return self.system.clone();
        }
        mean_by_system(&self.segment)
    }
}

fn mean_by_system(segment: &BTreeMap<RowKey, f64>) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (k, v) in segment {
        let g = groups.entry(&k.system).or_insert((0.0, 0));
        g.0 += v;
        g.1 += 1;
    }
    groups
        .into_iter()
        .map(|(s, (sum, n))| (s.to_string(), sum / n as f64))
        .collect()
}

/// Human judgments of one language pair split by level and dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanScores {
    pub system: BTreeMap<String, f64>,
    pub segment: BTreeMap<RowKey, f64>,
    pub by_dimension: BTreeMap<String, BTreeMap<RowKey, f64>>,
}

impl HumanScores {
    pub fn from_judgments(judgments: &[HumanJudgment]) -> Result<Self> {
        let mut out = HumanScores::default();
        let mut seen = BTreeSet::new();
        for j in judgments {
            if !j.score.is_finite() {
                return Err(Error::invalid(format!(
                    "human score for system {:?} is not finite",
                    j.system
                )));
            }
            if !seen.insert((j.system.clone(), j.segment.clone(), j.dimension.clone())) {
                return Err(Error::invalid(format!(
                    "duplicate human judgment for ({}, {:?}, {:?})",
                    j.system, j.segment, j.dimension
                )));
            }
            match (&j.segment, &j.dimension) {
                (None, None) => {
                    out.system.insert(j.system.clone(), j.score);
                }
                (Some(seg), None) => {
                    out.segment.insert(RowKey::new(&j.system, seg), j.score);
                }
                (Some(seg), Some(dim)) => {
                    out.by_dimension
                        .entry(dim.clone())
                        .or_default()
                        .insert(RowKey::new(&j.system, seg), j.score);
                }
                // System-level dimension scores are not used by any statistic.
                (None, Some(_)) => {}
            }
        }
        Ok(out)
    }

    pub fn system_level(&self) -> BTreeMap<String, f64> {
        if !self.system.is_empty() {
            return self.system.clone();
        }
        mean_by_system(&self.segment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguagePairReport {
    pub name: String,
    pub n_systems: usize,
    pub pairwise_accuracy: Option<f64>,
    pub correct_pairs: usize,
    pub n_pairs_used: usize,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
    pub n_segment_items: usize,
    #[serde(default)]
    pub spearman: BTreeMap<String, f64>,
}

/// Meta-evaluation of one metric over one or more language pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEvalReport {
    pub metric: String,
    pub kendall_variant: String,
    /// Pooled over every language pair's system pairs.
    pub pairwise_accuracy: Option<f64>,
    pub n_pairs_used: usize,
    pub language_pairs: Vec<LanguagePairReport>,
}

pub fn evaluate_language_pair(name: &str, metric: &MetricScores, human: &HumanScores) -> Result<LanguagePairReport> {
    let mut report = LanguagePairReport {
        name: name.to_string(),
        n_systems: 0,
        pairwise_accuracy: None,
        correct_pairs: 0,
        n_pairs_used: 0,
        pearson: None,
        kendall: None,
        n_segment_items: 0,
        spearman: BTreeMap::new(),
    };
    let metric_sys = metric.system_level();
    let human_sys = human.system_level();
    if !metric_sys.is_empty() && !human_sys.is_empty() {
        let acc = pairwise_accuracy(&metric_sys, &human_sys)?;
        let (m, h) = align(&metric_sys, &human_sys);
        report.n_systems = m.len();
        report.pearson = Some(pearson(&m, &h)?);
        report.pairwise_accuracy = Some(acc.accuracy);
        report.correct_pairs = acc.correct;
        report.n_pairs_used = acc.pairs_used;
    }
    if !metric.segment.is_empty() && !human.segment.is_empty() {
        report.kendall = Some(segment_kendall(&metric.segment, &human.segment)?);
        report.n_segment_items = align(&metric.segment, &human.segment).0.len();
    }
    for (dim, scores) in &human.by_dimension {
        let (m, h) = align(&metric.segment, scores);
        if m.len() < 2 {
            return Err(Error::invalid(format!(
                "dimension {dim:?}: fewer than 2 items scored by both metric and humans"
            )));
        }
        report.spearman.insert(dim.clone(), spearman(&m, &h)?);
    }
    if report.pairwise_accuracy.is_none() && report.kendall.is_none() && report.spearman.is_empty() {
        return Err(Error::invalid(format!(
            "language pair {name:?}: metric and human scores share no level to correlate"
        )));
    }
    Ok(report)
}

impl MetaEvalReport {
    pub fn new(metric: impl Into<String>, language_pairs: Vec<LanguagePairReport>) -> Self {
        let correct: usize = language_pairs.iter().map(|lp| lp.correct_pairs).sum();
        let used: usize = language_pairs.iter().map(|lp| lp.n_pairs_used).sum();
        MetaEvalReport {
            metric: metric.into(),
            kendall_variant: KENDALL_VARIANT.to_string(),
            pairwise_accuracy: (used > 0).then(|| correct as f64 / used as f64),
            n_pairs_used: used,
            language_pairs,
        }
    }

    /// Checks the documented value ranges.
    pub fn validate(&self) -> Result<()> {
        let corr_ok = |v: Option<f64>| v.is_none_or(|v| v.is_finite() && (-1.0..=1.0).contains(&v));
        let acc_ok = |v: Option<f64>| v.is_none_or(|v| v.is_finite() && (0.0..=1.0).contains(&v));
        if !acc_ok(self.pairwise_accuracy) {
            return Err(Error::invalid("pooled accuracy outside [0, 1]"));
        }
        for lp in &self.language_pairs {
            if !acc_ok(lp.pairwise_accuracy) || lp.correct_pairs > lp.n_pairs_used {
                return Err(Error::invalid(format!("{}: accuracy outside [0, 1]", lp.name)));
            }
            if !corr_ok(lp.pearson) || !corr_ok(lp.kendall) || !lp.spearman.values().all(|v| corr_ok(Some(*v))) {
                return Err(Error::invalid(format!("{}: correlation outside [-1, 1]", lp.name)));
            }
        }
        Ok(())
    }

    /// Aligned text table: accuracy as a percentage, correlations to 3 decimals.
    pub fn render_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut out = String::new();
        let _ = writeln!(out, "metric: {}  (kendall: {})", self.metric, self.kendall_variant);
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "lang-pair", "systems", "acc", "pearson", "kendall", "pairs"
        );
        for lp in &self.language_pairs {
            let acc = lp
                .pairwise_accuracy
                .map_or_else(|| "-".to_string(), |a| format!("{:.1}%", a * 100.0));
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}",
                lp.name,
                lp.n_systems,
                acc,
                fmt(lp.pearson),
                fmt(lp.kendall),
                lp.n_pairs_used
            );
            for (dim, v) in &lp.spearman {
                let _ = writeln!(out, "  spearman[{dim}] {v:.3}");
            }
        }
        if let Some(acc) = self.pairwise_accuracy {
            let _ = writeln!(out, "pooled accuracy: {:.1}% over {} pairs", acc * 100.0, self.n_pairs_used);
        }
        out
    }
}
