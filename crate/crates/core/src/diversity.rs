//! Self-BLEU, DistinctN, unique-token counts, and diversity-aware selection
//! of reference candidates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram_metrics::{bleu_sentence, BleuConfig};
use crate::textproc::{count_ngrams, tokenize_words, TokenSequence};

pub const DEFAULT_SELF_BLEU_THRESHOLD: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Llm,
    Gold,
    External,
}

/// Reference candidates for one segment, in generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub segment_id: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub n: usize,
    pub distinct_n: f64,
    pub unique_tokens: usize,
    pub total_tokens: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub self_bleu: Vec<f64>,
}

/// Outcome of diversity-aware selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kept: CandidateSet,
    /// Indices into the input candidates, ascending.
    pub kept_indices: Vec<usize>,
    /// Self-BLEU of every input candidate, computed once on the full set.
    /// Empty for single-candidate input.
    pub self_bleu: Vec<f64>,
    /// True when no candidate passed the threshold and the minimum-Self-BLEU one was kept.
    pub fallback: bool,
}

/// Self-BLEU of each candidate, scored jointly against all the others as one
/// multi-reference set.
pub fn self_bleu(candidates: &[TokenSequence], cfg: &BleuConfig) -> Result<Vec<f64>> {
    if candidates.len() < 2 {
        return Err(Error::invalid("Self-BLEU needs at least two candidates"));
    }
    let mut others: Vec<TokenSequence> = Vec::with_capacity(candidates.len() - 1);
    candidates
        .iter()
        .enumerate()
        .map(|(i, hyp)| {
            others.clear();
            others.extend(
                candidates
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, c)| c.clone()),
            );
            Ok(bleu_sentence(hyp, &others, cfg)?.value)
        })
        .collect()
}

/// Keeps candidates whose Self-BLEU is strictly below `threshold`, in one pass
/// over scores computed on the full input. If nothing survives, the candidate
/// with the lowest Self-BLEU (earliest on ties) is kept alone.
pub fn select_diverse_tokenized(
    set: &CandidateSet,
    tokens: &[TokenSequence],
    threshold: f64,
    cfg: &BleuConfig,
) -> Result<Selection> {
    if set.candidates.is_empty() {
        return Err(Error::invalid(format!(
            "segment {}: candidate set is empty",
            set.segment_id
        )));
    }
    if tokens.len() != set.candidates.len() {
        return Err(Error::invalid("token sequences do not match candidates"));
    }
    if set.candidates.len() == 1 {
        return Ok(Selection {
            kept: set.clone(),
            kept_indices: vec![0],
            self_bleu: Vec::new(),
            fallback: false,
        });
    }
    let scores = self_bleu(tokens, cfg)?;
    let mut kept_indices: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] < threshold).collect();
    let fallback = kept_indices.is_empty();
    if fallback {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = i;
            }
        }
        kept_indices.push(best);
    }
    let kept = CandidateSet {
        segment_id: set.segment_id.clone(),
        candidates: kept_indices.iter().map(|&i| set.candidates[i].clone()).collect(),
        provenance: set.provenance,
    };
    Ok(Selection {
        kept,
        kept_indices,
        self_bleu: scores,
        fallback,
    })
}

/// [`select_diverse_tokenized`] with word tokenization.
pub fn select_diverse(set: &CandidateSet, threshold: f64, cfg: &BleuConfig) -> Result<Selection> {
    let tokens: Vec<TokenSequence> = set.candidates.iter().map(|c| tokenize_words(c)).collect();
    select_diverse_tokenized(set, &tokens, threshold, cfg)
}

/// Distinct n-grams over total n-grams across the corpus; 0 when the corpus has no n-grams.
pub fn distinct_n(corpus: &[TokenSequence], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("DistinctN order must be at least 1"));
    }
    let mut distinct: HashSet<&[String]> = HashSet::new();
    let mut total = 0usize;
    for seq in corpus {
        for (gram, count) in count_ngrams(seq.tokens(), n) {
            distinct.insert(gram);
            total += count;
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        distinct.len() as f64 / total as f64
    })
}

pub fn unique_tokens(corpus: &[TokenSequence]) -> usize {
    corpus
        .iter()
        .flat_map(|s| s.iter())
        .collect::<HashSet<&str>>()
        .len()
}

pub fn diversity_report(corpus: &[TokenSequence], n: usize) -> Result<DiversityReport> {
    Ok(DiversityReport {
        n,
        distinct_n: distinct_n(corpus, n)?,
        unique_tokens: unique_tokens(corpus),
        total_tokens: corpus.iter().map(TokenSequence::len).sum(),
        self_bleu: Vec::new(),
    })
}
