use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricScore, ScoreDetail};
use crate::error::{Error, Result};
use crate::textproc::{count_ngrams, tokenize_subwords, SubwordVocab, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    None,
    /// Each order with zero matches gets precision `1 / (2^k * total)`,
    /// where `k` counts the zero-match orders seen so far.
    #[default]
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RefLength {
    /// Reference length closest to the hypothesis length; ties go to the shorter one.
    #[default]
    Closest,
    Shortest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub effective_ref_length: RefLength,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 4,
            smoothing: Smoothing::Exp,
            effective_ref_length: RefLength::Closest,
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::invalid("BLEU max_order must be at least 1"));
        }
        Ok(())
    }
}

/// Sufficient statistics for BLEU. Summing them over segments and scoring
/// the sum gives corpus BLEU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub matched: Vec<u64>,
    pub total: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl CorpusStats {
    pub fn zero(max_order: usize) -> Self {
        CorpusStats {
            matched: vec![0; max_order],
            total: vec![0; max_order],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    pub fn max_order(&self) -> usize {
        self.total.len()
    }

    /// Associative, commutative accumulation.
    pub fn merge(&mut self, other: &CorpusStats) {
        debug_assert_eq!(self.max_order(), other.max_order());
        for (a, b) in self.matched.iter_mut().zip(&other.matched) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Closed-form BLEU over these statistics. The score is 0 when any order
    /// has no hypothesis n-grams or when no unigram matches at all.
    pub fn score(&self, cfg: &BleuConfig) -> MetricScore {
        let per_order: Vec<f64> = self
            .matched
            .iter()
            .zip(&self.total)
            .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect();
        let c = self.hyp_len as f64;
        let r = self.ref_len as f64;
        let brevity_penalty = if self.hyp_len == 0 {
            0.0
        } else if c >= r {
            1.0
        } else {
            (1.0 - r / c).exp()
        };

        let value = if self.total.contains(&0) || self.matched[0] == 0 {
            0.0
        } else {
            let mut log_sum = 0.0;
            let mut smooth = 1.0;
            let mut zero = false;
            for (&m, &t) in self.matched.iter().zip(&self.total) {
                let p = if m > 0 {
                    m as f64 / t as f64
                } else {
                    match cfg.smoothing {
                        Smoothing::None => {
                            zero = true;
                            break;
                        }
                        Smoothing::Exp => {
                            smooth *= 2.0;
                            1.0 / (smooth * t as f64)
                        }
                    }
                };
                log_sum += p.ln();
            }
            if zero {
                0.0
            } else {
                let geo = (log_sum / self.total.len() as f64).exp();
                (brevity_penalty * geo * 100.0).clamp(0.0, 100.0)
            }
        };

        MetricScore {
            value,
            per_order: Some(per_order),
            detail: ScoreDetail::Bleu {
                brevity_penalty,
                hyp_len: self.hyp_len,
                ref_len: self.ref_len,
            },
        }
    }
}

fn effective_ref_len(hyp_len: usize, refs: &[TokenSequence], mode: RefLength) -> usize {
    let lens = refs.iter().map(TokenSequence::len);
    match mode {
        RefLength::Shortest => lens.min().unwrap_or(0),
        RefLength::Closest => lens
            .min_by_key(|&l| (l.abs_diff(hyp_len), l))
            .unwrap_or(0),
    }
}

/// Segment statistics with multi-reference clipping: each hypothesis n-gram
/// is credited up to the largest count it has in any single reference.
pub fn bleu_stats(hyp: &TokenSequence, refs: &[TokenSequence], cfg: &BleuConfig) -> Result<CorpusStats> {
    cfg.validate()?;
    if refs.is_empty() {
        return Err(Error::invalid("BLEU needs at least one reference"));
    }
    let mut stats = CorpusStats::zero(cfg.max_order);
    stats.hyp_len = hyp.len() as u64;
    stats.ref_len = effective_ref_len(hyp.len(), refs, cfg.effective_ref_length) as u64;
    for n in 1..=cfg.max_order {
        let hyp_counts = count_ngrams(hyp.tokens(), n);
        if hyp_counts.is_empty() {
            continue;
        }
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (gram, count) in count_ngrams(r.tokens(), n) {
                if hyp_counts.contains_key(gram) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
        }
        let matched: usize = hyp_counts
            .iter()
            .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        stats.matched[n - 1] = matched as u64;
        stats.total[n - 1] = (hyp.len() + 1 - n) as u64;
    }
    Ok(stats)
}

pub fn bleu_sentence(hyp: &TokenSequence, refs: &[TokenSequence], cfg: &BleuConfig) -> Result<MetricScore> {
    Ok(bleu_stats(hyp, refs, cfg)?.score(cfg))
}

/// Micro-averaged corpus BLEU: statistics are summed over segments before scoring.
pub fn bleu_corpus<'a, I>(pairs: I, cfg: &BleuConfig) -> Result<MetricScore>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a [TokenSequence])>,
{
    cfg.validate()?;
    let mut acc = CorpusStats::zero(cfg.max_order);
    let mut any = false;
    for (hyp, refs) in pairs {
        acc.merge(&bleu_stats(hyp, refs, cfg)?);
        any = true;
    }
    if !any {
        return Err(Error::invalid("corpus BLEU needs at least one segment"));
    }
    Ok(acc.score(cfg))
}

/// Corpus BLEU over subword pieces. With `pretokenized` set, both sides are
/// split on whitespace and the vocabulary is not consulted.
pub fn spbleu_corpus<S: AsRef<str>>(
    pairs: &[(S, Vec<S>)],
    vocab: Option<&SubwordVocab>,
    pretokenized: bool,
    cfg: &BleuConfig,
) -> Result<MetricScore> {
    let tokenize = |text: &str| -> Result<TokenSequence> {
        if pretokenized {
            Ok(TokenSequence::pretokenized(text))
        } else {
            let vocab = vocab.ok_or_else(|| {
                Error::invalid("spBLEU needs a subword vocabulary unless input is pretokenized")
            })?;
            Ok(tokenize_subwords(text, vocab))
        }
    };
    let mut tokenized = Vec::with_capacity(pairs.len());
    for (hyp, refs) in pairs {
        let refs = refs
            .iter()
            .map(|r| tokenize(r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        tokenized.push((tokenize(hyp.as_ref())?, refs));
    }
    bleu_corpus(tokenized.iter().map(|(h, r)| (h, r.as_slice())), cfg)
}
