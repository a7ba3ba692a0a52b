//! JSONL (and TSV import) readers and writers for every pipeline artifact.
//!
//! | file             | one record per line                                         |
//! |------------------|-------------------------------------------------------------|
//! | `segments.jsonl` | `{"id", "source", "gold_refs": [..], "generated_refs"?: [..]}` |
//! | `outputs.jsonl`  | `{"system", "segment", "hypothesis"}`                        |
//! | `refs.jsonl`     | [`GenerationRecord`]                                         |
//! | `human.jsonl`    | [`HumanJudgment`]                                            |
//! | `matrix.jsonl`   | [`ScoreRow`]                                                 |
//! | `scores.jsonl`   | [`ScoreRecord`]                                              |
//!
//! TSV imports: segments as `id<TAB>source[<TAB>gold...]`, outputs as
//! `id<TAB>hypothesis` with the system named after the file stem.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metaeval::HumanJudgment;
use crate::refgen::GenerationRecord;
use crate::score_combine::{ScoreMatrix, ScoreRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub source: String,
    #[serde(default)]
    pub gold_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generated_refs: Vec<String>,
}

/// Which references a segment is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceSet {
    Gold,
    Generated,
    #[default]
    Both,
}

impl std::str::FromStr for ReferenceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(ReferenceSet::Gold),
            "generated" => Ok(ReferenceSet::Generated),
            "both" => Ok(ReferenceSet::Both),
            other => Err(Error::invalid(format!(
                "unknown reference set {other:?} (expected gold, generated or both)"
            ))),
        }
    }
}

impl Segment {
    /// Gold references first, then generated ones, filtered by `set`.
    pub fn references(&self, set: ReferenceSet) -> Vec<&str> {
        let gold = matches!(set, ReferenceSet::Gold | ReferenceSet::Both);
        let generated = matches!(set, ReferenceSet::Generated | ReferenceSet::Both);
        let mut refs = Vec::new();
        if gold {
            refs.extend(self.gold_refs.iter().map(String::as_str));
        }
        if generated {
            refs.extend(self.generated_refs.iter().map(String::as_str));
        }
        refs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub system: String,
    pub segment: String,
    pub hypothesis: String,
}

/// Flat score line used for metric outputs. `segment == None` marks a
/// system-level score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub system: String,
    #[serde(default)]
    pub segment: Option<String>,
    pub metric: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_refs: Option<usize>,
}

/// Test set, references, and system outputs for one language pair or task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCorpus {
    pub name: String,
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
    /// system → segment id → hypothesis
    systems: BTreeMap<String, BTreeMap<String, String>>,
    pub pretokenized: bool,
    pub reference_set: ReferenceSet,
}

impl EvalCorpus {
    pub fn new(name: impl Into<String>, segments: Vec<Segment>) -> Result<Self> {
        let mut index = HashMap::with_capacity(segments.len());
        for (i, s) in segments.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate segment id {:?}", s.id)));
            }
        }
        Ok(EvalCorpus {
            name: name.into(),
            segments,
            index,
            systems: BTreeMap::new(),
            pretokenized: false,
            reference_set: ReferenceSet::Both,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: &str) -> Option<&Segment> {
        self.index.get(id).map(|&i| &self.segments[i])
    }

    pub fn systems(&self) -> &BTreeMap<String, BTreeMap<String, String>> {
        &self.systems
    }

    pub fn add_output(&mut self, system: &str, segment: &str, hypothesis: &str) -> Result<()> {
        if !self.index.contains_key(segment) {
            return Err(Error::invalid(format!(
                "system {system:?} output references unknown segment {segment:?}"
            )));
        }
        let outputs = self.systems.entry(system.to_string()).or_default();
        if outputs.insert(segment.to_string(), hypothesis.to_string()).is_some() {
            return Err(Error::invalid(format!(
                "duplicate output for system {system:?}, segment {segment:?}"
            )));
        }
        Ok(())
    }
}

fn load_err(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

/// Reads non-blank lines with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Parses every non-blank line of a JSONL file, keeping line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line)
                .map(|v| (n, v))
                .map_err(|e| load_err(path, n, e))
        })
        .collect()
}

pub fn write_jsonl<'a, T, I>(path: impl AsRef<Path>, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serializes");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<Vec<(usize, Segment)>> {
    let path = path.as_ref();
    if !is_tsv(path) {
        return read_jsonl(path);
    }
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let mut cols = line.split('\t');
            let id = cols.next().unwrap_or_default().to_string();
            let source = cols
                .next()
                .ok_or_else(|| load_err(path, n, "expected id<TAB>source[<TAB>gold...]"))?
                .to_string();
            Ok((
                n,
                Segment {
                    id,
                    source,
                    gold_refs: cols.map(str::to_string).collect(),
                    generated_refs: Vec::new(),
                },
            ))
        })
        .collect()
}

pub fn load_outputs(path: impl AsRef<Path>) -> Result<Vec<(usize, OutputRecord)>> {
    let path = path.as_ref();
    if !is_tsv(path) {
        return read_jsonl(path);
    }
    let system = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let (id, hyp) = line
                .split_once('\t')
                .ok_or_else(|| load_err(path, n, "expected id<TAB>hypothesis"))?;
            Ok((
                n,
                OutputRecord {
                    system: system.clone(),
                    segment: id.to_string(),
                    hypothesis: hyp.to_string(),
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Corpus name; defaults to the segments file stem.
    pub name: Option<String>,
    /// Texts are already tokenized; tokenizers split on whitespace only.
    pub pretokenized: bool,
}

/// Loads and cross-validates a corpus: segment ids must be unique and every
/// output must refer to a known segment.
pub fn load_corpus(segments: impl AsRef<Path>, outputs: &[PathBuf], opts: &LoadOptions) -> Result<EvalCorpus> {
    let seg_path = segments.as_ref();
    let mut segs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (n, s) in load_segments(seg_path)? {
        if s.id.is_empty() {
            return Err(load_err(seg_path, n, "empty segment id"));
        }
        if let Some(first) = seen.insert(s.id.clone(), n) {
            return Err(load_err(
                seg_path,
                n,
                format!("duplicate segment id {:?} (first on line {first})", s.id),
            ));
        }
        segs.push(s);
    }
    let name = opts.name.clone().unwrap_or_else(|| {
        seg_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut corpus = EvalCorpus::new(name, segs)?;
    corpus.pretokenized = opts.pretokenized;
    for path in outputs {
        for (n, o) in load_outputs(path)? {
            corpus
                .add_output(&o.system, &o.segment, &o.hypothesis)
                .map_err(|e| load_err(path, n, e))?;
        }
    }
    Ok(corpus)
}

/// Writes `segments.jsonl` and `outputs.jsonl` into `dir`.
pub fn save_corpus(corpus: &EvalCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_jsonl(dir.join("segments.jsonl"), corpus.segments())?;
    let outputs: Vec<OutputRecord> = corpus
        .systems()
        .iter()
        .flat_map(|(sys, outs)| {
            outs.iter().map(move |(seg, hyp)| OutputRecord {
                system: sys.clone(),
                segment: seg.clone(),
                hypothesis: hyp.clone(),
            })
        })
        .collect();
    write_jsonl(dir.join("outputs.jsonl"), &outputs)
}

pub fn load_generation_records(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

/// Fills `generated_refs` from successful records (the last record per
/// segment wins) and sets the scoring reference set: gold plus generated
/// when `use_gold`, generated only otherwise.
pub fn merge_references(mut corpus: EvalCorpus, records: &[GenerationRecord], use_gold: bool) -> Result<EvalCorpus> {
    for r in records.iter().filter(|r| r.is_ok()) {
        let &i = corpus.index.get(&r.segment_id).ok_or_else(|| {
            Error::invalid(format!(
                "generation record for unknown segment {:?}",
                r.segment_id
            ))
        })?;
        corpus.segments[i].generated_refs = r.candidates.clone();
    }
    corpus.reference_set = if use_gold {
        ReferenceSet::Both
    } else {
        ReferenceSet::Generated
    };
    Ok(corpus)
}

pub fn load_human_judgments(path: impl AsRef<Path>) -> Result<Vec<HumanJudgment>> {
    let path = path.as_ref();
    let rows: Vec<(usize, HumanJudgment)> = read_jsonl(path)?;
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (n, j) in rows {
        if !j.score.is_finite() {
            return Err(load_err(path, n, "score is not finite"));
        }
        let key = (j.system.clone(), j.segment.clone(), j.dimension.clone());
        if let Some(first) = seen.insert(key, n) {
            return Err(load_err(path, n, format!("duplicate judgment (first on line {first})")));
        }
        out.push(j);
    }
    Ok(out)
}

pub fn load_score_matrix(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    let rows: Vec<(usize, ScoreRow)> = read_jsonl(path)?;
    for (n, row) in &rows {
        if let Some((id, _)) = row.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(load_err(path, *n, format!("non-finite score for reference {id:?}")));
        }
        if row.scores.is_empty() {
            return Err(load_err(path, *n, "row has no scores"));
        }
    }
    let mut first_line: HashMap<(String, String), usize> = HashMap::new();
    for (n, row) in &rows {
        if let Some(first) = first_line.insert((row.system.clone(), row.segment.clone()), *n) {
            return Err(load_err(path, *n, format!("duplicate row (first on line {first})")));
        }
    }
    ScoreMatrix::new(rows.into_iter().map(|(_, r)| r).collect()).map_err(|e| load_err(path, 0, e))
}

pub fn load_score_records(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let rows: Vec<(usize, ScoreRecord)> = read_jsonl(path)?;
    rows.into_iter()
        .map(|(n, r)| {
            if r.score.is_finite() {
                Ok(r)
            } else {
                Err(load_err(path, n, "score is not finite"))
            }
        })
        .collect()
}
