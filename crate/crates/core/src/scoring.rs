//! Scoring every system of a corpus with one metric, at segment and system level.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus_io::{EvalCorpus, ReferenceSet, ScoreRecord};
use crate::error::{Error, Result};
use crate::metaeval::MetricScores;
use crate::ngram_metrics::{
    bleu_stats, chrf_segment, rouge_l, rouge_n, BleuConfig, ChrfConfig, ChrfStats, CorpusStats,
};
use crate::score_combine::{RowKey, ScoreRow};
use crate::textproc::{tokenize_chars, tokenize_subwords, tokenize_words, SubwordVocab, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Bleu,
    SpBleu,
    Chrf,
    Rouge1,
    Rouge2,
    RougeL,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Bleu,
        Metric::SpBleu,
        Metric::Chrf,
        Metric::Rouge1,
        Metric::Rouge2,
        Metric::RougeL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::SpBleu => "spbleu",
            Metric::Chrf => "chrf",
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bleu" => Ok(Metric::Bleu),
            "spbleu" | "f200spbleu" => Ok(Metric::SpBleu),
            "chrf" => Ok(Metric::Chrf),
            "rouge1" => Ok(Metric::Rouge1),
            "rouge2" => Ok(Metric::Rouge2),
            "rougel" => Ok(Metric::RougeL),
            _ => Err(Error::invalid(format!(
                "unknown metric {s:?} (expected bleu, spbleu, chrf, rouge1, rouge2, rougeL)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScoringOptions {
    /// Lowercase text before tokenization.
    pub lowercase: bool,
    pub bleu: BleuConfig,
    pub chrf: ChrfConfig,
    /// Required for spBLEU unless the corpus is pretokenized.
    pub vocab: Option<SubwordVocab>,
}

impl ScoringOptions {
    pub fn tokenize(&self, metric: Metric, text: &str, pretokenized: bool) -> Result<TokenSequence> {
        let lowered;
        let text = if self.lowercase {
            lowered = text.to_lowercase();
            lowered.as_str()
        } else {
            text
        };
        Ok(match metric {
            Metric::Chrf => tokenize_chars(text),
            _ if pretokenized => TokenSequence::pretokenized(text),
            Metric::SpBleu => {
                let vocab = self.vocab.as_ref().ok_or_else(|| {
                    Error::invalid("spBLEU needs a subword vocabulary unless input is pretokenized")
                })?;
                tokenize_subwords(text, vocab)
            }
            _ => tokenize_words(text),
        })
    }
}

/// Scores of one metric over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub metric: Metric,
    pub reference_set: ReferenceSet,
    pub max_refs: Option<usize>,
    /// Corpus-level BLEU/spBLEU/chrF; mean segment score for ROUGE.
    pub system: BTreeMap<String, f64>,
    pub segment: BTreeMap<RowKey, f64>,
    /// Number of references each scored segment used.
    pub n_refs: BTreeMap<String, usize>,
}

enum SegmentStat {
    Bleu(CorpusStats),
    Chrf(ChrfStats),
    Plain,
}

impl CorpusScores {
    pub fn column_id(&self) -> String {
        let set = match self.reference_set {
            ReferenceSet::Gold => "gold",
            ReferenceSet::Generated => "generated",
            ReferenceSet::Both => "both",
        };
        match self.max_refs {
            Some(k) => format!("{set}@{k}"),
            None => set.to_string(),
        }
    }

    pub fn metric_scores(&self) -> MetricScores {
        MetricScores {
            system: self.system.clone(),
            segment: self.segment.clone(),
        }
    }

    /// Segment rows followed by system rows.
    pub fn records(&self, include_segments: bool, include_systems: bool) -> Vec<ScoreRecord> {
        let mut out = Vec::new();
        if include_segments {
            out.extend(self.segment.iter().map(|(k, v)| ScoreRecord {
                system: k.system.clone(),
                segment: Some(k.segment.clone()),
                metric: self.metric.name().to_string(),
                score: *v,
                n_refs: self.n_refs.get(&k.segment).copied(),
            }));
        }
        if include_systems {
            out.extend(self.system.iter().map(|(s, v)| ScoreRecord {
                system: s.clone(),
                segment: None,
                metric: self.metric.name().to_string(),
                score: *v,
                n_refs: None,
            }));
        }
        out
    }
}

/// Sentence score of `hyp` against `refs` (max over references for ROUGE and chrF).
fn sentence_value(metric: Metric, hyp: &TokenSequence, refs: &[TokenSequence], opts: &ScoringOptions) -> Result<f64> {
    Ok(match metric {
        Metric::Bleu | Metric::SpBleu => {
            let stats = bleu_stats(hyp, refs, &opts.bleu)?;
            stats.score(&opts.bleu).value
        }
        Metric::Chrf => chrf_segment(hyp, refs, &opts.chrf)?.1.value,
        Metric::Rouge1 => rouge_n(hyp, refs, 1)?.value,
        Metric::Rouge2 => rouge_n(hyp, refs, 2)?.value,
        Metric::RougeL => rouge_l(hyp, refs)?.value,
    })
}

/// Per-(hypothesis, reference) sentence scores: one row per system output,
/// one column per reference, named `gold:<i>` or `generated:<i>`.
pub fn reference_matrix(
    corpus: &EvalCorpus,
    metric: Metric,
    reference_set: ReferenceSet,
    max_refs: Option<usize>,
    opts: &ScoringOptions,
) -> Result<Vec<ScoreRow>> {
    if max_refs == Some(0) {
        return Err(Error::invalid("max_refs must be at least 1"));
    }
    let pretok = corpus.pretokenized;
    let jobs: Vec<(&String, &String, &String)> = corpus
        .systems()
        .iter()
        .flat_map(|(sys, outs)| outs.iter().map(move |(seg, hyp)| (sys, seg, hyp)))
        .collect();
    jobs.par_iter()
        .map(|&(sys, seg_id, hyp)| {
            let seg = corpus.segment(seg_id).expect("outputs are validated against segments");
            let mut columns: Vec<(String, &str)> = Vec::new();
            if matches!(reference_set, ReferenceSet::Gold | ReferenceSet::Both) {
                columns.extend(seg.gold_refs.iter().enumerate().map(|(i, r)| (format!("gold:{i}"), r.as_str())));
            }
            if matches!(reference_set, ReferenceSet::Generated | ReferenceSet::Both) {
                columns.extend(
                    seg.generated_refs
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (format!("generated:{i}"), r.as_str())),
                );
            }
            if let Some(k) = max_refs {
                columns.truncate(k);
            }
            if columns.is_empty() {
                return Err(Error::invalid(format!(
                    "segment {seg_id:?} has no references in the {reference_set:?} set"
                )));
            }
            let hyp = opts.tokenize(metric, hyp, pretok)?;
            let scores = columns
                .into_iter()
                .map(|(col, text)| {
                    let r = opts.tokenize(metric, text, pretok)?;
                    Ok((col, sentence_value(metric, &hyp, std::slice::from_ref(&r), opts)?))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(ScoreRow {
                system: sys.clone(),
                segment: seg_id.clone(),
                scores,
                metric: metric.name().to_string(),
                scale: Some([0.0, 100.0]),
            })
        })
        .collect()
}

/// Scores every system output in `corpus` against the chosen references,
/// keeping at most `max_refs` of them per segment (gold first, then
/// generated, in stored order). Segments are processed in parallel on the
/// current rayon pool.
pub fn score_corpus(
    corpus: &EvalCorpus,
    metric: Metric,
    reference_set: ReferenceSet,
    max_refs: Option<usize>,
    opts: &ScoringOptions,
) -> Result<CorpusScores> {
    if max_refs == Some(0) {
        return Err(Error::invalid("max_refs must be at least 1"));
    }
    if corpus.systems().is_empty() {
        return Err(Error::invalid("corpus has no system outputs to score"));
    }
    let pretok = corpus.pretokenized;
    let used: BTreeSet<&str> = corpus
        .systems()
        .values()
        .flat_map(|outs| outs.keys().map(String::as_str))
        .collect();
    let refs: HashMap<&str, Vec<TokenSequence>> = used
        .par_iter()
        .map(|&id| {
            let seg = corpus.segment(id).expect("outputs are validated against segments");
            let mut texts = seg.references(reference_set);
            if let Some(k) = max_refs {
                texts.truncate(k);
            }
            if texts.is_empty() {
                return Err(Error::invalid(format!(
                    "segment {id:?} has no references in the {reference_set:?} set"
                )));
            }
            let toks = texts
                .iter()
                .map(|t| opts.tokenize(metric, t, pretok))
                .collect::<Result<Vec<_>>>()?;
            Ok((id, toks))
        })
        .collect::<Result<_>>()?;

    let mut system = BTreeMap::new();
    let mut segment = BTreeMap::new();
    for (sys, outputs) in corpus.systems() {
        let per_segment: Vec<(&String, f64, SegmentStat)> = outputs
            .par_iter()
            .map(|(seg_id, hyp)| {
                let hyp = opts.tokenize(metric, hyp, pretok)?;
                let r = &refs[seg_id.as_str()];
                let (value, stat) = match metric {
                    Metric::Bleu | Metric::SpBleu => {
                        let stats = bleu_stats(&hyp, r, &opts.bleu)?;
                        (stats.score(&opts.bleu).value, SegmentStat::Bleu(stats))
                    }
                    Metric::Chrf => {
                        let (stats, score) = chrf_segment(&hyp, r, &opts.chrf)?;
                        (score.value, SegmentStat::Chrf(stats))
                    }
                    m => (sentence_value(m, &hyp, r, opts)?, SegmentStat::Plain),
                };
                Ok((seg_id, value, stat))
            })
            .collect::<Result<_>>()?;
        if per_segment.is_empty() {
            continue;
        }
        let sys_value = match metric {
            Metric::Bleu | Metric::SpBleu => {
                let mut acc = CorpusStats::zero(opts.bleu.max_order);
                for (_, _, stat) in &per_segment {
                    if let SegmentStat::Bleu(s) = stat {
                        acc.merge(s);
                    }
                }
                acc.score(&opts.bleu).value
            }
            Metric::Chrf => {
                let mut acc = ChrfStats::zero(opts.chrf.n_max);
                for (_, _, stat) in &per_segment {
                    if let SegmentStat::Chrf(s) = stat {
                        acc.merge(s);
                    }
                }
                acc.score(opts.chrf.beta).value
            }
            _ => per_segment.iter().map(|(_, v, _)| v).sum::<f64>() / per_segment.len() as f64,
        };
        system.insert(sys.clone(), sys_value);
        for (seg_id, v, _) in per_segment {
            segment.insert(RowKey::new(sys, seg_id), v);
        }
    }
    let n_refs = refs.iter().map(|(id, r)| (id.to_string(), r.len())).collect();
    Ok(CorpusScores {
        metric,
        reference_set,
        max_refs,
        system,
        segment,
        n_refs,
    })
}
