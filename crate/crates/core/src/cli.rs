//! `multiref` command-line interface. Stages exchange data only through files.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus_io::{
    load_corpus, load_generation_records, load_human_judgments, load_outputs, load_score_matrix,
    load_score_records, load_segments, merge_references, write_jsonl, LoadOptions, ReferenceSet,
    ScoreRecord,
};
use crate::diversity::{diversity_report, select_diverse_tokenized, CandidateSet, Provenance, DEFAULT_SELF_BLEU_THRESHOLD};
use crate::error::{Error, Result};
use crate::metaeval::{evaluate_language_pair, leakage_gap, HumanScores, LeakageGapReport, MetaEvalReport, MetricScores};
use crate::ngram_metrics::{BleuConfig, ChrfConfig};
use crate::refgen::{
    generate_references, GenerationConfig, GenerationRecord, Language, PromptTemplate, RecordLog,
    SourceSegment, Task,
};
use crate::score_combine::{combine_matrix, system_scores, CombinePolicy, RowKey, ScoreMatrix};
use crate::scoring::{reference_matrix, score_corpus, CorpusScores, Metric, ScoringOptions};
use crate::textproc::SubwordVocab;

#[derive(Debug, Parser)]
#[command(name = "multiref", version, about = "Multi-reference evaluation with LLM-generated references")]
pub struct Cli {
    /// TOML config file (sections: generation, prompt, bleu, chrf, selection).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for scoring (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Lowercase text before tokenization.
    #[arg(long, global = true)]
    pub lowercase: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ask an LLM endpoint for reference candidates (appends to refs.jsonl, resumable).
    Generate(GenerateArgs),
    /// Keep diverse candidates by Self-BLEU.
    Select(SelectArgs),
    /// Score system outputs with multi-reference n-gram metrics.
    Score(ScoreArgs),
    /// Combine a per-reference score matrix into per-segment and system scores.
    Combine(CombineArgs),
    /// Correlate metric scores with human judgments.
    Metaeval(MetaevalArgs),
    /// DistinctN and unique-token counts per system.
    Diversity(DiversityArgs),
    /// Score gaps between system pairs under single- and multi-reference scoring.
    LeakageReport(LeakageArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Translation,
    Summarization,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LanguageArg {
    English,
    Chinese,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// refs.jsonl to append to; segments already completed there are skipped.
    #[arg(long)]
    pub out: PathBuf,
    /// Candidates requested per segment.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    /// Base URL of an OpenAI-compatible server, or mock://echo | mock://flaky?failures=K | mock://garbage.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Leave gold references out of the prompt.
    #[arg(long)]
    pub no_ground_truth: bool,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum)]
    pub language: Option<LanguageArg>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input refs.jsonl.
    #[arg(long)]
    pub refs: PathBuf,
    /// Filtered refs.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-segment Self-BLEU report (JSONL).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Keep candidates with Self-BLEU strictly below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefsArg {
    Gold,
    Generated,
    Both,
}

impl From<RefsArg> for ReferenceSet {
    fn from(r: RefsArg) -> Self {
        match r {
            RefsArg::Gold => ReferenceSet::Gold,
            RefsArg::Generated => ReferenceSet::Generated,
            RefsArg::Both => ReferenceSet::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// System outputs (outputs.jsonl or <system>.tsv); repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub outputs: Vec<PathBuf>,
    /// Generated references (refs.jsonl from generate/select).
    #[arg(long)]
    pub generated: Option<PathBuf>,
    /// Subword vocabulary for spBLEU.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Texts are already tokenized; split on whitespace only.
    #[arg(long)]
    pub pretokenized: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Reference set for both levels. Default: segment level uses gold + generated,
    /// system level uses generated only (gold when nothing was generated).
    #[arg(long, value_enum)]
    pub refs: Option<RefsArg>,
    #[arg(long, value_delimiter = ',', default_value = "bleu,chrf")]
    pub metrics: Vec<String>,
    /// Use at most K references per segment.
    #[arg(long)]
    pub max_refs: Option<usize>,
    /// Reference-count sweep `a..b` (inclusive); writes sweep.jsonl.
    #[arg(long)]
    pub sweep_refs: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Max,
    Mean,
    TopK,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Metric to combine when the matrix holds several.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_enum, default_value = "max")]
    pub policy: PolicyArg,
    /// k for top-k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Combined scores (scores.jsonl format).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetaevalArgs {
    /// Metric scores (scores.jsonl); one per language pair, repeatable.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Human judgments (human.jsonl); paired with --scores by position.
    #[arg(long, required = true)]
    pub human: Vec<PathBuf>,
    /// Language-pair names, paired by position (default: human file stem).
    #[arg(long)]
    pub lp: Vec<String>,
    /// Metric to evaluate when score files hold several.
    #[arg(long)]
    pub metric: Option<String>,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiversityArgs {
    /// System outputs; repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub outputs: Vec<PathBuf>,
    /// Also report the first gold reference of each segment as system "gold".
    #[arg(long)]
    pub segments: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LeakageArgs {
    /// System pair `A:B`; repeatable. Deltas are A minus B.
    #[arg(long = "pair", required = true)]
    pub pairs: Vec<String>,
    /// Precomputed single-reference scores (scores.jsonl).
    #[arg(long, requires = "multi", conflicts_with = "segments")]
    pub single: Option<PathBuf>,
    /// Precomputed multi-reference scores (scores.jsonl).
    #[arg(long, requires = "single")]
    pub multi: Option<PathBuf>,
    #[arg(long, requires = "outputs")]
    pub segments: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub outputs: Vec<PathBuf>,
    #[arg(long)]
    pub generated: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub pretokenized: bool,
    /// Metric to report (corpus mode default: bleu).
    #[arg(long)]
    pub metric: Option<String>,
    /// References for the multi-reference side.
    #[arg(long, value_enum, default_value = "generated")]
    pub multi_refs: RefsArg,
    #[arg(long)]
    pub max_refs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub task: Task,
    pub language: Language,
    pub include_ground_truth: Option<bool>,
    pub rules: Option<String>,
    pub task_description: Option<String>,
    pub ground_truth_label: Option<String>,
}

impl PromptConfig {
    pub fn template(&self) -> PromptTemplate {
        let mut t = PromptTemplate::builtin(self.task, self.language);
        let custom = self.rules.is_some() || self.task_description.is_some();
        if let Some(r) = &self.rules {
            t.rules = r.clone();
        }
        if let Some(d) = &self.task_description {
            t.task_description = d.clone();
        }
        if let Some(l) = &self.ground_truth_label {
            t.ground_truth_label = l.clone();
        }
        if let Some(g) = self.include_ground_truth {
            t.include_ground_truth = g;
        }
        if custom {
            t.language = Language::Custom;
        }
        t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub threshold: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            threshold: DEFAULT_SELF_BLEU_THRESHOLD,
        }
    }
}

/// Contents of the `--config` TOML file; every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub generation: GenerationConfig,
    pub prompt: PromptConfig,
    pub bleu: BleuConfig,
    pub chrf: ChrfConfig,
    pub selection: SelectionConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses arguments, runs the command, and maps errors to a nonzero exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::invalid("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ctx = Context {
        config,
        lowercase: cli.lowercase,
    };
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Select(a) => cmd_select(&ctx, a),
        Command::Score(a) => cmd_score(&ctx, a),
        Command::Combine(a) => cmd_combine(a),
        Command::Metaeval(a) => cmd_metaeval(a),
        Command::Diversity(a) => cmd_diversity(&ctx, a),
        Command::LeakageReport(a) => cmd_leakage_report(&ctx, a),
    })
}

struct Context {
    config: FileConfig,
    lowercase: bool,
}

impl Context {
    fn scoring_options(&self, vocab: Option<&Path>) -> Result<ScoringOptions> {
        Ok(ScoringOptions {
            lowercase: self.lowercase,
            bleu: self.config.bleu,
            chrf: self.config.chrf,
            vocab: vocab.map(SubwordVocab::load).transpose()?,
        })
    }
}

fn cmd_generate(ctx: &Context, a: &GenerateArgs) -> Result<()> {
    let mut cfg = ctx.config.generation.clone();
    if let Some(n) = a.n {
        cfg.n_references = n;
    }
    if let Some(m) = &a.model {
        cfg.model_name = m.clone();
    }
    if let Some(e) = &a.endpoint {
        cfg.endpoint_url = e.clone();
    }
    if let Some(r) = a.max_retries {
        cfg.max_retries = r;
    }
    if let Some(c) = a.concurrency {
        cfg.concurrency = c;
    }
    cfg.validate()?;
    let mut prompt = ctx.config.prompt.clone();
    if let Some(t) = a.task {
        prompt.task = match t {
            TaskArg::Translation => Task::Translation,
            TaskArg::Summarization => Task::Summarization,
        };
    }
    if let Some(l) = a.language {
        prompt.language = match l {
            LanguageArg::English => Language::English,
            LanguageArg::Chinese => Language::Chinese,
        };
    }
    if a.no_ground_truth {
        prompt.include_ground_truth = Some(false);
    }
    let template = prompt.template();
    template.validate()?;

    let segments: Vec<SourceSegment> = load_segments(&a.segments)?
        .into_iter()
        .map(|(_, s)| SourceSegment {
            gold: s.gold_refs.first().cloned(),
            id: s.id,
            source: s.source,
        })
        .collect();
    let transport = cfg.transport()?;
    let (mut log, completed) = RecordLog::open(&a.out)?;
    let summary = generate_references(&segments, &template, &cfg, &transport, &completed, |r| log.append(r))?;
    let done = summary.records.len() - summary.failed;
    println!(
        "generate: {} segments, {} done, {} skipped (already complete), {} failed",
        segments.len(),
        done,
        summary.skipped,
        summary.failed
    );
    for r in summary.records.iter().filter(|r| !r.is_ok()) {
        println!(
            "  failed {} after {} attempts: {}",
            r.segment_id,
            r.attempt_count,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

/// Latest successful record per segment, in first-seen order.
fn latest_ok_records(records: Vec<GenerationRecord>) -> Vec<GenerationRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut latest: BTreeMap<String, GenerationRecord> = BTreeMap::new();
    for r in records.into_iter().filter(GenerationRecord::is_ok) {
        if !latest.contains_key(&r.segment_id) {
            order.push(r.segment_id.clone());
        }
        latest.insert(r.segment_id.clone(), r);
    }
    order
        .into_iter()
        .map(|id| latest.remove(&id).expect("tracked"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionReportLine {
    pub segment_id: String,
    pub self_bleu: Vec<f64>,
    pub kept_indices: Vec<usize>,
    pub fallback: bool,
}

fn cmd_select(ctx: &Context, a: &SelectArgs) -> Result<()> {
    let threshold = a.threshold.unwrap_or(ctx.config.selection.threshold);
    let opts = ctx.scoring_options(None)?;
    let bleu = ctx.config.bleu;
    let records = latest_ok_records(load_generation_records(&a.refs)?);
    let mut kept = Vec::with_capacity(records.len());
    let mut report = Vec::with_capacity(records.len());
    let (mut n_in, mut n_out, mut fallbacks) = (0, 0, 0);
    for mut r in records {
        let set = CandidateSet {
            segment_id: r.segment_id.clone(),
            candidates: r.candidates.clone(),
            provenance: Provenance::Llm,
        };
        let tokens = set
            .candidates
            .iter()
            .map(|c| opts.tokenize(Metric::Bleu, c, false))
            .collect::<Result<Vec<_>>>()?;
        let sel = select_diverse_tokenized(&set, &tokens, threshold, &bleu)?;
        n_in += set.candidates.len();
        n_out += sel.kept.candidates.len();
        fallbacks += usize::from(sel.fallback);
        report.push(SelectionReportLine {
            segment_id: r.segment_id.clone(),
            self_bleu: sel.self_bleu.clone(),
            kept_indices: sel.kept_indices.clone(),
            fallback: sel.fallback,
        });
        r.candidates = sel.kept.candidates;
        kept.push(r);
    }
    write_jsonl(&a.out, &kept)?;
    if let Some(p) = &a.report {
        write_jsonl(p, &report)?;
    }
    println!(
        "select: {} segments, {} -> {} candidates (threshold {threshold}), {} fallbacks",
        kept.len(),
        n_in,
        n_out,
        fallbacks
    );
    Ok(())
}

fn load_eval_corpus(c: &CorpusArgs) -> Result<crate::corpus_io::EvalCorpus> {
    let mut corpus = load_corpus(
        &c.segments,
        &c.outputs,
        &LoadOptions {
            name: None,
            pretokenized: c.pretokenized,
        },
    )?;
    if let Some(g) = &c.generated {
        corpus = merge_references(corpus, &load_generation_records(g)?, true)?;
    }
    Ok(corpus)
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::invalid(format!("expected a..b, got {s:?}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| Error::invalid(format!("sweep bound {v:?}: {e}")))
    };
    let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
    if a == 0 || a > b {
        return Err(Error::invalid(format!("invalid sweep range {s:?}")));
    }
    Ok((a, b))
}

fn parse_metrics(names: &[String]) -> Result<Vec<Metric>> {
    let mut out: Vec<Metric> = Vec::new();
    for n in names {
        let m: Metric = n.trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no metrics selected"));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepRecord {
    pub metric: String,
    pub system: String,
    pub n_refs: usize,
    pub score: f64,
}

fn print_system_table(title: &str, columns: &[String], rows: &BTreeMap<String, Vec<Option<f64>>>) {
    println!("{title}");
    let width = rows.keys().map(String::len).max().unwrap_or(6).max(6);
    let mut header = format!("{:<width$}", "system");
    for c in columns {
        header.push_str(&format!(" {c:>10}"));
    }
    println!("{header}");
    for (sys, vals) in rows {
        let mut line = format!("{sys:<width$}");
        for v in vals {
            match v {
                Some(v) => line.push_str(&format!(" {v:>10.2}")),
                None => line.push_str(&format!(" {:>10}", "-")),
            }
        }
        println!("{line}");
    }
}

fn cmd_score(ctx: &Context, a: &ScoreArgs) -> Result<()> {
    let metrics = parse_metrics(&a.metrics)?;
    let corpus = load_eval_corpus(&a.corpus)?;
    if metrics.contains(&Metric::SpBleu) && a.corpus.vocab.is_none() && !corpus.pretokenized {
        return Err(Error::invalid("spbleu needs --vocab unless --pretokenized is set"));
    }
    let opts = ctx.scoring_options(a.corpus.vocab.as_deref())?;
    let has_generated = corpus.segments().iter().any(|s| !s.generated_refs.is_empty());
    let (segment_set, system_set) = match a.refs {
        Some(r) => (r.into(), r.into()),
        None if has_generated => (ReferenceSet::Both, ReferenceSet::Generated),
        None => (ReferenceSet::Gold, ReferenceSet::Gold),
    };

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut matrix_rows = Vec::new();
    let mut records = Vec::new();
    let mut table: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for (mi, &m) in metrics.iter().enumerate() {
        let seg_scores = score_corpus(&corpus, m, segment_set, a.max_refs, &opts)?;
        let sys_scores = if system_set == segment_set {
            seg_scores.clone()
        } else {
            score_corpus(&corpus, m, system_set, a.max_refs, &opts)?
        };
        matrix_rows.extend(reference_matrix(&corpus, m, segment_set, a.max_refs, &opts)?);
        records.extend(seg_scores.records(true, false));
        records.extend(sys_scores.records(false, true));
        for (sys, v) in &sys_scores.system {
            table.entry(sys.clone()).or_insert_with(|| vec![None; metrics.len()])[mi] = Some(*v);
        }
    }
    write_jsonl(a.out_dir.join("matrix.jsonl"), &matrix_rows)?;
    write_jsonl(a.out_dir.join("scores.jsonl"), &records)?;
    let columns: Vec<String> = metrics.iter().map(|m| m.name().to_string()).collect();
    print_system_table(
        &format!(
            "score: {} segments; segment refs {segment_set:?}, system refs {system_set:?}",
            corpus.segments().len()
        ),
        &columns,
        &table,
    );

    if let Some(range) = &a.sweep_refs {
        let (lo, hi) = parse_range(range)?;
        let mut sweep = Vec::new();
        for &m in &metrics {
            for k in lo..=hi {
                let s: CorpusScores = score_corpus(&corpus, m, system_set, Some(k), &opts)?;
                sweep.extend(s.system.iter().map(|(sys, v)| SweepRecord {
                    metric: m.name().to_string(),
                    system: sys.clone(),
                    n_refs: k,
                    score: *v,
                }));
            }
        }
        write_jsonl(a.out_dir.join("sweep.jsonl"), &sweep)?;
        println!("sweep: {} rows written for refs {lo}..{hi}", sweep.len());
    }
    Ok(())
}

fn cmd_combine(a: &CombineArgs) -> Result<()> {
    let policy = match a.policy {
        PolicyArg::Max => CombinePolicy::Max,
        PolicyArg::Mean => CombinePolicy::Mean,
        PolicyArg::TopK => CombinePolicy::TopKMean {
            k: a.k.ok_or_else(|| Error::invalid("--policy top-k needs --k"))?,
        },
    };
    let matrix = select_matrix(&a.matrix, a.metric.as_deref())?;
    let combined = combine_matrix(&matrix, policy)?;
    let systems = system_scores(&combined);
    let name = format!("{}-{}", matrix.metric_name(), policy.name());
    let mut records: Vec<ScoreRecord> = combined
        .iter()
        .map(|(k, v)| ScoreRecord {
            system: k.system.clone(),
            segment: Some(k.segment.clone()),
            metric: name.clone(),
            score: *v,
            n_refs: None,
        })
        .collect();
    records.extend(systems.iter().map(|(s, v)| ScoreRecord {
        system: s.clone(),
        segment: None,
        metric: name.clone(),
        score: *v,
        n_refs: None,
    }));
    write_jsonl(&a.out, &records)?;
    let table: BTreeMap<String, Vec<Option<f64>>> =
        systems.iter().map(|(s, v)| (s.clone(), vec![Some(*v)])).collect();
    print_system_table(
        &format!("combine: {} rows, policy {}", combined.len(), policy.name()),
        &[name],
        &table,
    );
    Ok(())
}

/// Loads a matrix file, keeping only rows of `metric` when the file mixes metrics.
fn select_matrix(path: &Path, metric: Option<&str>) -> Result<ScoreMatrix> {
    let rows: Vec<(usize, crate::score_combine::ScoreRow)> = crate::corpus_io::read_jsonl(path)?;
    let metrics: BTreeSet<&str> = rows.iter().map(|(_, r)| r.metric.as_str()).collect();
    match metric {
        None if metrics.len() > 1 => Err(Error::invalid(format!(
            "{} holds several metrics ({}); choose one with --metric",
            path.display(),
            metrics.into_iter().collect::<Vec<_>>().join(", ")
        ))),
        None => load_score_matrix(path),
        Some(m) => {
            if !metrics.contains(m) {
                return Err(Error::invalid(format!("{} has no rows for metric {m:?}", path.display())));
            }
            ScoreMatrix::new(rows.into_iter().map(|(_, r)| r).filter(|r| r.metric == m).collect())
        }
    }
}

fn metric_scores_from_records(records: &[ScoreRecord], metric: &str) -> MetricScores {
    let mut out = MetricScores::default();
    for r in records.iter().filter(|r| r.metric == metric) {
        match &r.segment {
            Some(seg) => {
                out.segment.insert(RowKey::new(&r.system, seg), r.score);
            }
            None => {
                out.system.insert(r.system.clone(), r.score);
            }
        }
    }
    out
}

fn pick_metric(records: &[Vec<ScoreRecord>], requested: Option<&str>) -> Result<String> {
    let mut common: Option<BTreeSet<String>> = None;
    for file in records {
        let names: BTreeSet<String> = file.iter().map(|r| r.metric.clone()).collect();
        common = Some(match common {
            None => names,
            Some(c) => c.intersection(&names).cloned().collect(),
        });
    }
    let common = common.unwrap_or_default();
    match requested {
        Some(m) if common.contains(m) => Ok(m.to_string()),
        Some(m) => Err(Error::invalid(format!("metric {m:?} is not present in every score file"))),
        None if common.len() == 1 => Ok(common.into_iter().next().expect("one")),
        None if common.is_empty() => Err(Error::invalid("score files share no metric")),
        None => Err(Error::invalid(format!(
            "score files hold several metrics ({}); choose one with --metric",
            common.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn cmd_metaeval(a: &MetaevalArgs) -> Result<()> {
    if a.scores.len() != a.human.len() {
        return Err(Error::invalid("--scores and --human must be given the same number of times"));
    }
    if !a.lp.is_empty() && a.lp.len() != a.human.len() {
        return Err(Error::invalid("--lp must be given once per --human file or not at all"));
    }
    let score_files = a
        .scores
        .iter()
        .map(load_score_records)
        .collect::<Result<Vec<_>>>()?;
    let metric = pick_metric(&score_files, a.metric.as_deref())?;
    let mut lps = Vec::new();
    for (i, (records, human_path)) in score_files.iter().zip(&a.human).enumerate() {
        let name = a.lp.get(i).cloned().unwrap_or_else(|| {
            human_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("lp{i}"))
        });
        let human = HumanScores::from_judgments(&load_human_judgments(human_path)?)?;
        let metric_scores = metric_scores_from_records(records, &metric);
        lps.push(
            evaluate_language_pair(&name, &metric_scores, &human)
                .map_err(|e| Error::invalid(format!("{name}: {e}")))?,
        );
    }
    let report = MetaEvalReport::new(metric, lps);
    report.validate()?;
    print!("{}", report.render_table());
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(out, json + "\n").map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiversityLine {
    pub system: String,
    pub n: usize,
    pub distinct_n: f64,
    pub unique_tokens: usize,
    pub total_tokens: usize,
}

fn cmd_diversity(ctx: &Context, a: &DiversityArgs) -> Result<()> {
    let opts = ctx.scoring_options(None)?;
    let mut texts: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for path in &a.outputs {
        for (_, o) in load_outputs(path)? {
            texts.entry(o.system).or_default().push(o.hypothesis);
        }
    }
    if let Some(seg) = &a.segments {
        let gold: Vec<String> = load_segments(seg)?
            .into_iter()
            .filter_map(|(_, s)| s.gold_refs.into_iter().next())
            .collect();
        texts.insert("gold".into(), gold);
    }
    let mut lines = Vec::new();
    for (system, hyps) in &texts {
        let corpus = hyps
            .iter()
            .map(|h| opts.tokenize(Metric::Bleu, h, false))
            .collect::<Result<Vec<_>>>()?;
        let r = diversity_report(&corpus, a.n)?;
        lines.push(DiversityLine {
            system: system.clone(),
            n: r.n,
            distinct_n: r.distinct_n,
            unique_tokens: r.unique_tokens,
            total_tokens: r.total_tokens,
        });
    }
    let width = lines.iter().map(|l| l.system.len()).max().unwrap_or(6).max(6);
    println!("{:<width$} {:>12} {:>12} {:>12}", "system", format!("distinct{}", a.n), "unique", "tokens");
    for l in &lines {
        println!(
            "{:<width$} {:>12.4} {:>12} {:>12}",
            l.system, l.distinct_n, l.unique_tokens, l.total_tokens
        );
    }
    if let Some(out) = &a.out {
        write_jsonl(out, &lines)?;
    }
    Ok(())
}

fn system_level(records: &[ScoreRecord], metric: Option<&str>) -> Result<BTreeMap<String, f64>> {
    let names: BTreeSet<&str> = records.iter().map(|r| r.metric.as_str()).collect();
    let metric = match metric {
        Some(m) => m.to_string(),
        None if names.len() == 1 => names.into_iter().next().expect("one").to_string(),
        None => return Err(Error::invalid("score file holds several metrics; choose one with --metric")),
    };
    Ok(metric_scores_from_records(records, &metric).system_level())
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    s.split_once(':')
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| Error::invalid(format!("expected a system pair A:B, got {s:?}")))
}

fn cmd_leakage_report(ctx: &Context, a: &LeakageArgs) -> Result<()> {
    let pairs = a.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
    let (single, multi, unit) = if let (Some(s), Some(m)) = (&a.single, &a.multi) {
        let s_rec = load_score_records(s)?;
        let m_rec = load_score_records(m)?;
        let metric = a.metric.as_deref();
        (
            system_level(&s_rec, metric)?,
            system_level(&m_rec, metric)?,
            metric.unwrap_or("score").to_string(),
        )
    } else {
        let segments = a
            .segments
            .clone()
            .ok_or_else(|| Error::invalid("give either --single/--multi or --segments/--outputs"))?;
        let corpus_args = CorpusArgs {
            segments,
            outputs: a.outputs.clone(),
            generated: a.generated.clone(),
            vocab: a.vocab.clone(),
            pretokenized: a.pretokenized,
        };
        let metric: Metric = a.metric.as_deref().unwrap_or("bleu").parse()?;
        let mut corpus = load_eval_corpus(&corpus_args)?;
        let opts = ctx.scoring_options(a.vocab.as_deref())?;
        // Single reference: the first gold reference only.
        let full = corpus.clone();
        let trimmed: Vec<crate::corpus_io::Segment> = full
            .segments()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.gold_refs.truncate(1);
                s
            })
            .collect();
        let mut single_corpus = crate::corpus_io::EvalCorpus::new(full.name.clone(), trimmed)?;
        single_corpus.pretokenized = full.pretokenized;
        for (sys, outs) in full.systems() {
            for (seg, hyp) in outs {
                single_corpus.add_output(sys, seg, hyp)?;
            }
        }
        let single = score_corpus(&single_corpus, metric, ReferenceSet::Gold, None, &opts)?;
        corpus.reference_set = a.multi_refs.into();
        let multi = score_corpus(&corpus, metric, a.multi_refs.into(), a.max_refs, &opts)?;
        (single.system, multi.system, metric.name().to_string())
    };
    let reports = pairs
        .iter()
        .map(|(x, y)| leakage_gap(&single, &multi, x, y))
        .collect::<Result<Vec<LeakageGapReport>>>()?;
    println!(
        "{:<24} {:>12} {:>12} {:>12} {:>8}",
        format!("pair ({unit})"),
        "single",
        "multi",
        "shrinkage",
        "ratio"
    );
    for r in &reports {
        println!(
            "{:<24} {:>+12.2} {:>+12.2} {:>+12.2} {:>8}",
            format!("{} - {}", r.system_a, r.system_b),
            r.delta_single,
            r.delta_multi,
            r.shrinkage,
            r.ratio.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
        );
    }
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&reports).expect("report serializes");
        fs::write(out, json + "\n").map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}
