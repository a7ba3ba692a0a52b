use super::{f1, MetricScore, ScoreDetail};
use crate::error::{Error, Result};
use crate::textproc::{count_ngrams, TokenSequence};

fn best_of(
    refs: &[TokenSequence],
    mut prf: impl FnMut(&TokenSequence) -> (f64, f64),
) -> Result<MetricScore> {
    if refs.is_empty() {
        return Err(Error::invalid("ROUGE needs at least one reference"));
    }
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0);
    for (i, r) in refs.iter().enumerate() {
        let (p, rec) = prf(r);
        let f = f1(p, rec);
        if f > best.0 {
            best = (f, p, rec, i);
        }
    }
    Ok(MetricScore {
        value: best.0 * 100.0,
        per_order: None,
        detail: ScoreDetail::Rouge {
            precision: best.1,
            recall: best.2,
            best_ref: best.3,
        },
    })
}

/// ROUGE-N F1, maximized over references.
pub fn rouge_n(hyp: &TokenSequence, refs: &[TokenSequence], n: usize) -> Result<MetricScore> {
    if n == 0 {
        return Err(Error::invalid("ROUGE-N order must be at least 1"));
    }
    let hyp_counts = count_ngrams(hyp.tokens(), n);
    let hyp_total = (hyp.len() + 1).saturating_sub(n);
    best_of(refs, |r| {
        let ref_total = (r.len() + 1).saturating_sub(n);
        if hyp_total == 0 || ref_total == 0 {
            return (0.0, 0.0);
        }
        let ref_counts = count_ngrams(r.tokens(), n);
        let overlap: usize = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        (
            overlap as f64 / hyp_total as f64,
            overlap as f64 / ref_total as f64,
        )
    })
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 (LCS based), maximized over references.
pub fn rouge_l(hyp: &TokenSequence, refs: &[TokenSequence]) -> Result<MetricScore> {
    best_of(refs, |r| {
        if hyp.is_empty() || r.is_empty() {
            return (0.0, 0.0);
        }
        let lcs = lcs_len(hyp.tokens(), r.tokens()) as f64;
        (lcs / hyp.len() as f64, lcs / r.len() as f64)
    })
}
