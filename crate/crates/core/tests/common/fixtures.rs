use std::path::Path;

use multiref::corpus_io::{write_jsonl, EvalCorpus, OutputRecord, Segment};
use multiref::refgen::{GenerationRecord, GenerationStatus};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHABET: [&str; 5] = ["a", "b", "c", "d", "e"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tokens drawn from `alphabet` with length in `min_len..=max_len`.
pub fn random_tokens(rng: &mut impl Rng, min_len: usize, max_len: usize, alphabet: &[&str]) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len)
        .map(|_| alphabet.choose(rng).expect("non-empty alphabet").to_string())
        .collect()
}

pub fn random_refs(rng: &mut impl Rng, max_len: usize) -> Vec<Vec<String>> {
    let k = rng.random_range(1..=4);
    (0..k).map(|_| random_tokens(rng, 0, max_len, &ALPHABET)).collect()
}

/// Short words from a tiny alphabet, so char n-grams collide often.
pub fn random_text(rng: &mut impl Rng, max_words: usize) -> String {
    let words = rng.random_range(0..=max_words);
    (0..words)
        .map(|_| {
            let len = rng.random_range(1..=3);
            (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Values on a coarse grid so ties are common.
pub fn random_tied_vec(rng: &mut impl Rng, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect()
}

/// Synthetic leakage corpus.
///
/// Every segment is a sequence of concept slots separated by fixed function
/// words; each concept has four interchangeable surface forms. The gold
/// reference mostly uses the first form. System `L` copies the gold text
/// verbatim; system `H` picks forms independently at random. The ten
/// generated references pick forms uniformly.
pub struct LeakageFixture {
    pub segments: Vec<Segment>,
    pub outputs: Vec<OutputRecord>,
}

pub const LEAKED: &str = "L";
pub const PARAPHRASE: &str = "H";
pub const N_GENERATED: usize = 10;

const FUNCTION_WORDS: [&str; 6] = ["the", "of", "and", "to", "in", "with"];

impl LeakageFixture {
    pub fn build(n_segments: usize, seed: u64) -> Self {
        let mut rng = rng(seed);
        let n_concepts = 60;
        let forms: Vec<[String; 4]> = (0..n_concepts)
            .map(|c| std::array::from_fn(|f| format!("c{c}f{f}")))
            .collect();
        let templates: Vec<Vec<usize>> = (0..20)
            .map(|_| (0..10).map(|_| rng.random_range(0..n_concepts)).collect())
            .collect();
        let realize = |rng: &mut ChaCha8Rng, concepts: &[usize], pick: &dyn Fn(&mut ChaCha8Rng) -> usize| {
            let mut words = Vec::new();
            for (i, &c) in concepts.iter().enumerate() {
                if i > 0 {
                    words.push(FUNCTION_WORDS[(c + i) % FUNCTION_WORDS.len()].to_string());
                }
                words.push(forms[c][pick(rng)].clone());
            }
            words.join(" ")
        };
        let gold_pick = |r: &mut ChaCha8Rng| if r.random_bool(0.7) { 0 } else { r.random_range(0..4) };
        let uniform = |r: &mut ChaCha8Rng| r.random_range(0..4);

        let mut segments = Vec::with_capacity(n_segments);
        let mut outputs = Vec::with_capacity(2 * n_segments);
        for s in 0..n_segments {
            let concepts = &templates[rng.random_range(0..templates.len())];
            let id = format!("seg{s:04}");
            let gold = realize(&mut rng, concepts, &gold_pick);
            let para = realize(&mut rng, concepts, &uniform);
            let generated: Vec<String> = (0..N_GENERATED).map(|_| realize(&mut rng, concepts, &uniform)).collect();
            segments.push(Segment {
                id: id.clone(),
                source: format!("source {s}"),
                gold_refs: vec![gold.clone()],
                generated_refs: generated,
            });
            outputs.push(OutputRecord {
                system: LEAKED.into(),
                segment: id.clone(),
                hypothesis: gold,
            });
            outputs.push(OutputRecord {
                system: PARAPHRASE.into(),
                segment: id,
                hypothesis: para,
            });
        }
        LeakageFixture { segments, outputs }
    }

    pub fn corpus(&self) -> EvalCorpus {
        let mut c = EvalCorpus::new("leakage", self.segments.clone()).expect("valid fixture");
        for o in &self.outputs {
            c.add_output(&o.system, &o.segment, &o.hypothesis).expect("valid output");
        }
        c
    }

    pub fn hypotheses(&self, system: &str) -> Vec<&str> {
        self.outputs
            .iter()
            .filter(|o| o.system == system)
            .map(|o| o.hypothesis.as_str())
            .collect()
    }

    /// Writes segments.jsonl (gold only), outputs.jsonl and refs.jsonl.
    pub fn write(&self, dir: &Path) {
        let gold_only: Vec<Segment> = self
            .segments
            .iter()
            .map(|s| Segment {
                generated_refs: Vec::new(),
                ..s.clone()
            })
            .collect();
        write_jsonl(dir.join("segments.jsonl"), &gold_only).unwrap();
        write_jsonl(dir.join("outputs.jsonl"), &self.outputs).unwrap();
        let records: Vec<GenerationRecord> = self
            .segments
            .iter()
            .map(|s| GenerationRecord {
                segment_id: s.id.clone(),
                status: GenerationStatus::Ok,
                prompt_used: String::new(),
                raw_response: String::new(),
                candidates: s.generated_refs.clone(),
                attempt_count: 1,
                timestamp: 0,
                model: "fixture".into(),
                error: None,
            })
            .collect();
        write_jsonl(dir.join("refs.jsonl"), &records).unwrap();
    }
}

/// Small translation-style corpus for end-to-end runs: `n` segments, three
/// systems of decreasing quality, and system-level human scores that rank
/// them in that order.
pub struct PipelineFixture {
    pub segments: Vec<Segment>,
    pub outputs: Vec<OutputRecord>,
}

const NOUNS: [&str; 8] = ["cat", "dog", "river", "house", "teacher", "market", "garden", "train"];
const VERBS: [&str; 6] = ["sees", "likes", "finds", "visits", "paints", "follows"];
const ADJS: [&str; 6] = ["small", "old", "green", "quiet", "busy", "bright"];

impl PipelineFixture {
    pub fn build(n: usize, seed: u64) -> Self {
        let mut rng = rng(seed);
        let mut segments = Vec::new();
        let mut outputs = Vec::new();
        for i in 0..n {
            let pick = |r: &mut ChaCha8Rng, xs: &[&str]| xs.choose(r).unwrap().to_string();
            let (a1, n1, v, a2, n2) = (
                pick(&mut rng, &ADJS),
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &ADJS),
                pick(&mut rng, &NOUNS),
            );
            let gold = format!("the {a1} {n1} {v} the {a2} {n2} .");
            let id = format!("s{i:02}");
            segments.push(Segment {
                id: id.clone(),
                source: format!("der {a1} {n1} {v} den {a2} {n2} ."),
                gold_refs: vec![gold.clone()],
                generated_refs: Vec::new(),
            });
            let good = format!("the {a1} {n1} {v} a {a2} {n2} .");
            let mid = format!("a {n1} {v} the {n2} .");
            let bad = format!("{n2} {n1} {v} .");
            for (sys, hyp) in [("sysA", good), ("sysB", mid), ("sysC", bad)] {
                outputs.push(OutputRecord {
                    system: sys.into(),
                    segment: id.clone(),
                    hypothesis: hyp,
                });
            }
        }
        PipelineFixture { segments, outputs }
    }

    pub fn write(&self, dir: &Path) {
        write_jsonl(dir.join("segments.jsonl"), &self.segments).unwrap();
        write_jsonl(dir.join("outputs.jsonl"), &self.outputs).unwrap();
        let human = [("sysA", 0.9), ("sysB", 0.6), ("sysC", 0.2)]
            .iter()
            .map(|(s, v)| serde_json::json!({"system": s, "score": v}))
            .collect::<Vec<_>>();
        write_jsonl(dir.join("human.jsonl"), &human).unwrap();
    }
}
