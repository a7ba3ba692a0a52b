//! Multi-reference n-gram metrics on a 0–100 scale.

mod bleu;
mod chrf;
mod rouge;

pub use bleu::{
    bleu_corpus, bleu_sentence, bleu_stats, spbleu_corpus, BleuConfig, CorpusStats, RefLength,
    Smoothing,
};
pub use chrf::{chrf_corpus, chrf_corpus_text, chrf_segment, chrf_sentence, ChrfConfig, ChrfStats};
pub use rouge::{lcs_len, rouge_l, rouge_n};

use serde::{Deserialize, Serialize};

/// A scalar metric value with optional per-order breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    /// In `[0, 100]`.
    pub value: f64,
    /// Per-order precisions (BLEU) or F-scores (chrF), each in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_order: Option<Vec<f64>>,
    pub detail: ScoreDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDetail {
    Bleu {
        brevity_penalty: f64,
        hyp_len: u64,
        ref_len: u64,
    },
    Chrf {
        beta: f64,
        /// Orders that contributed to the mean (orders empty on both sides are skipped).
        effective_orders: usize,
    },
    Rouge {
        precision: f64,
        recall: f64,
        /// Index of the reference that produced the maximum F1.
        best_ref: usize,
    },
}

pub(crate) fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
