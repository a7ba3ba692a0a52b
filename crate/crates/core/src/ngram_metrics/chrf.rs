use serde::{Deserialize, Serialize};

use super::{MetricScore, ScoreDetail};
use crate::error::{Error, Result};
use crate::textproc::{count_ngrams, tokenize_chars, TokenSequence};

/// Character n-gram F-score settings (pure chrF, no word n-grams).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChrfConfig {
    pub n_max: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig { n_max: 6, beta: 2.0 }
    }
}

impl ChrfConfig {
    fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::invalid("chrF n_max must be at least 1"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid("chrF beta must be positive"));
        }
        Ok(())
    }
}

/// Per-order match statistics, summable across segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChrfStats {
    pub matched: Vec<u64>,
    pub hyp_total: Vec<u64>,
    pub ref_total: Vec<u64>,
}

impl ChrfStats {
    pub fn zero(n_max: usize) -> Self {
        ChrfStats {
            matched: vec![0; n_max],
            hyp_total: vec![0; n_max],
            ref_total: vec![0; n_max],
        }
    }

    pub fn between(hyp: &TokenSequence, reference: &TokenSequence, n_max: usize) -> Self {
        let mut stats = ChrfStats::zero(n_max);
        for n in 1..=n_max {
            let h = count_ngrams(hyp.tokens(), n);
            let r = count_ngrams(reference.tokens(), n);
            stats.matched[n - 1] = h
                .iter()
                .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)) as u64)
                .sum();
            stats.hyp_total[n - 1] = (hyp.len() + 1).saturating_sub(n) as u64;
            stats.ref_total[n - 1] = (reference.len() + 1).saturating_sub(n) as u64;
        }
        stats
    }

    pub fn merge(&mut self, other: &ChrfStats) {
        for (a, b) in self.matched.iter_mut().zip(&other.matched) {
            *a += b;
        }
        for (a, b) in self.hyp_total.iter_mut().zip(&other.hyp_total) {
            *a += b;
        }
        for (a, b) in self.ref_total.iter_mut().zip(&other.ref_total) {
            *a += b;
        }
    }

    /// Mean per-order F_beta over the orders that are non-empty on at least
    /// one side. An order empty on exactly one side scores 0. When every
    /// order is empty on both sides the two texts are identical (empty) and
    /// the score is 100.
    pub fn score(&self, beta: f64) -> MetricScore {
        let b2 = beta * beta;
        let per_order: Vec<f64> = (0..self.matched.len())
            .filter_map(|i| {
                let (m, h, r) = (self.matched[i], self.hyp_total[i], self.ref_total[i]);
                if h == 0 && r == 0 {
                    return None;
                }
                if h == 0 || r == 0 {
                    return Some(0.0);
                }
                let p = m as f64 / h as f64;
                let rec = m as f64 / r as f64;
                if p + rec == 0.0 {
                    Some(0.0)
                } else {
                    Some((1.0 + b2) * p * rec / (b2 * p + rec))
                }
            })
            .collect();
        let value = if per_order.is_empty() {
            100.0
        } else {
            (per_order.iter().sum::<f64>() / per_order.len() as f64 * 100.0).clamp(0.0, 100.0)
        };
        MetricScore {
            value,
            detail: ScoreDetail::Chrf {
                beta,
                effective_orders: per_order.len(),
            },
            per_order: Some(per_order),
        }
    }
}

/// Statistics and score against the reference that maximizes segment chrF
/// (ties: first). Inputs are character sequences.
pub fn chrf_segment(
    hyp: &TokenSequence,
    refs: &[TokenSequence],
    cfg: &ChrfConfig,
) -> Result<(ChrfStats, MetricScore)> {
    cfg.validate()?;
    if refs.is_empty() {
        return Err(Error::invalid("chrF needs at least one reference"));
    }
    let mut best: Option<(ChrfStats, MetricScore)> = None;
    for r in refs {
        let stats = ChrfStats::between(hyp, r, cfg.n_max);
        let score = stats.score(cfg.beta);
        if best.as_ref().is_none_or(|(_, b)| score.value > b.value) {
            best = Some((stats, score));
        }
    }
    Ok(best.expect("refs non-empty"))
}

/// Segment chrF: the maximum over references. Inputs are character sequences.
pub fn chrf_sentence(hyp: &TokenSequence, refs: &[TokenSequence], cfg: &ChrfConfig) -> Result<MetricScore> {
    cfg.validate()?;
    Ok(chrf_segment(hyp, refs, cfg)?.1)
}

/// Corpus chrF: per segment the best reference is chosen, its statistics are
/// summed over the corpus, and the sum is scored.
pub fn chrf_corpus<'a, I>(pairs: I, cfg: &ChrfConfig) -> Result<MetricScore>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a [TokenSequence])>,
{
    cfg.validate()?;
    let mut acc = ChrfStats::zero(cfg.n_max);
    let mut any = false;
    for (hyp, refs) in pairs {
        acc.merge(&chrf_segment(hyp, refs, cfg)?.0);
        any = true;
    }
    if !any {
        return Err(Error::invalid("corpus chrF needs at least one segment"));
    }
    Ok(acc.score(cfg.beta))
}

/// Corpus chrF on raw text.
pub fn chrf_corpus_text<S: AsRef<str>>(pairs: &[(S, Vec<S>)], cfg: &ChrfConfig) -> Result<MetricScore> {
    let tokenized: Vec<(TokenSequence, Vec<TokenSequence>)> = pairs
        .iter()
        .map(|(h, refs)| {
            (
                tokenize_chars(h.as_ref()),
                refs.iter().map(|r| tokenize_chars(r.as_ref())).collect(),
            )
        })
        .collect();
    chrf_corpus(tokenized.iter().map(|(h, r)| (h, r.as_slice())), cfg)
}
