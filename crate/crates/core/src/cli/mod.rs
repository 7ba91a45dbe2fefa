//! Experiment commands behind the `ctxmt` binary.
//!
//! Every command is deterministic given its arguments and seed, prints a
//! human-readable table and writes a JSON report embedding [`Provenance`]
//! to the report directory (`--report-dir`, else `CTXMT_REPORT_DIR`, else
//! `reports`). Artifacts are written atomically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    contrastive_accuracy, pairs_from_examples, translate_document, ContextMode, ContrastiveReport, DecodeConfig,
    MaskKind, MaskSpec,
};
use crate::metrics::{bleu, paired_bootstrap, pronoun_set, sweep, word_fmeasure, AlignmentReport, HeadMode};
use crate::nn::{load_checkpoint, save_checkpoint, DecodeMethod, Hyperparams, Model};
use crate::report::{to_json_lines, write_atomic, Provenance, REPORT_DIR_ENV};
use crate::scat::{
    convert_release, highlight_distance_histogram, parse_contrastive_set, parse_scat_lenient, read_scat, write_scat,
    EncodedScat, HighlightHistogram, ScatExample, DEFAULT_EPSILON,
};
use crate::text::{build_vocab, read_corpus, ContextConfig, ParallelDocument, Vocabulary};
use crate::train::{train, Start, TrainConfig, TrainData};
use crate::wsd;

/// Process exit status of a finished command.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPreset {
    #[default]
    Desk,
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub preset: ModelPreset,
    pub dropout: Option<f64>,
    pub label_smoothing: Option<f64>,
    pub max_len: Option<usize>,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            preset: ModelPreset::Desk,
            dropout: None,
            label_smoothing: None,
            max_len: None,
            init_seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn hyperparams(&self, vocab: usize) -> Result<Hyperparams> {
        let mut hp = match self.preset {
            ModelPreset::Desk => Hyperparams::desk(vocab),
            ModelPreset::Base => Hyperparams::base(vocab),
        };
        if let Some(d) = self.dropout {
            hp.dropout = d;
        }
        if let Some(s) = self.label_smoothing {
            hp.label_smoothing = s;
        }
        if let Some(m) = self.max_len {
            hp.max_len = m;
        }
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Document-level parallel corpus.
    pub corpus: Option<PathBuf>,
    /// Rationale set in JSON lines.
    pub scat: Option<PathBuf>,
    /// Existing vocabulary; built from the training data when absent.
    pub vocab: Option<PathBuf>,
    pub min_freq: usize,
    pub max_vocab: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            corpus: None,
            scat: None,
            vocab: None,
            min_freq: 1,
            max_vocab: 32_000,
        }
    }
}

/// Everything a training run depends on, loadable from TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctxmt", version, about = "Context-aware NMT with attention supervision")]
pub struct Cli {
    /// Report directory; overrides the environment variable.
    #[arg(long, global = true)]
    pub report_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model, optionally with attention regularization.
    Train(TrainArgs),
    /// Grid of attention/rationale alignment per type, layer and head.
    AlignAudit(AlignArgs),
    /// Contrastive pronoun accuracy under context masking.
    Contrastive(ContrastiveArgs),
    /// Translate documents and score BLEU and word f-measure.
    Translate(TranslateArgs),
    /// Forge a word-sense contrastive set from aligned, annotated text.
    ForgeWsd(ForgeArgs),
    /// Counts per context level and highlight-distance histograms.
    ScatStats(StatsArgs),
    /// Convert the public rationale release to JSON lines.
    ConvertScat(ConvertArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for checkpoint, vocabulary and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Pretrained checkpoint to start from (required by attnreg-pre).
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub scat: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p_scat: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub lr_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to `vocab.txt` next to the checkpoint.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub scat: PathBuf,
    /// Use at most this many examples (in file order).
    #[arg(long, default_value_t = 1000)]
    pub limit: usize,
    /// Average heads instead of scoring each one.
    #[arg(long)]
    pub average_heads: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ContrastiveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Contrastive set in JSON lines.
    #[arg(long)]
    pub set: PathBuf,
    /// `all` or one of none, supporting, random[:p], source-context,
    /// target-context, all-context.
    #[arg(long, default_value = "all")]
    pub mask: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    /// `gold` or `non-gold` target context.
    #[arg(long, default_value = "gold")]
    pub mode: String,
    /// Beam width; 1 decodes greedily.
    #[arg(long, default_value_t = 4)]
    pub beam: usize,
    #[arg(long, default_value_t = 100)]
    pub max_len: usize,
    /// Hypotheses of another system (one per line) for paired bootstrap.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ForgeArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub alignments: PathBuf,
    /// Reviewed group classes; without it only candidate groups are written.
    #[arg(long)]
    pub review: Option<PathBuf>,
    #[arg(long, default_value_t = wsd::DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long, default_value_t = wsd::DEFAULT_MIN_TARGETS)]
    pub min_targets: usize,
    #[arg(long, default_value_t = wsd::DEFAULT_Z)]
    pub z: f64,
    #[arg(long, default_value_t = wsd::DEFAULT_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub scat: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    /// Release directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

fn report_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"))
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    provenance: Provenance,
    #[serde(flatten)]
    body: T,
}

fn write_report<A: Serialize, T: Serialize>(dir: &Path, command: &str, args: &A, seed: u64, body: T) -> Result<()> {
    let args_json = serde_json::to_string(args)?;
    let report = Report {
        command,
        provenance: Provenance::new(&args_json, seed),
        body,
    };
    let text = serde_json::to_string_pretty(&report)?;
    write_atomic(&dir.join(format!("{command}.json")), text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    let dir = report_dir(cli.report_dir.as_deref());
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::AlignAudit(a) => cmd_align_audit(&a, &dir),
        Command::Contrastive(a) => cmd_contrastive(&a, &dir),
        Command::Translate(a) => cmd_translate(&a, &dir),
        Command::ForgeWsd(a) => cmd_forge_wsd(&a, &dir),
        Command::ScatStats(a) => cmd_scat_stats(&a, &dir),
        Command::ConvertScat(a) => cmd_convert_scat(&a, &dir),
    }
}

/// Loads the config file and applies flag overrides.
pub fn resolve_train_config(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml(&read_text(p)?)?,
        None => ExperimentConfig::default(),
    };
    let t = &mut cfg.train;
    if let Some(r) = &a.regime {
        t.regime = r.parse()?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { t.$field = v; })* };
    }
    set!(lambda, p_scat, steps, batch_size, warmup, lr_scale, seed);
    for (dst, src) in [
        (&mut cfg.data.corpus, &a.corpus),
        (&mut cfg.data.scat, &a.scat),
        (&mut cfg.data.vocab, &a.vocab),
    ] {
        if src.is_some() {
            dst.clone_from(src);
        }
    }
    cfg.train.validate()?;
    Ok(cfg)
}

/// Rationale examples as documents, for vocabulary construction.
fn scat_documents(examples: &[ScatExample]) -> Result<Vec<ParallelDocument>> {
    examples
        .iter()
        .map(|ex| {
            let mut pairs: Vec<(String, String)> =
                ex.ctx_src.iter().cloned().zip(ex.ctx_tgt.iter().cloned()).collect();
            pairs.push((ex.src.clone(), ex.tgt_correct.clone()));
            pairs.push((ex.src.clone(), ex.tgt_incorrect.clone()));
            ParallelDocument::new(ex.id.clone(), pairs)
        })
        .collect()
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(a)?;
    let corpus_path = cfg
        .data
        .corpus
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no training corpus (data.corpus or --corpus)".into()))?;
    let docs = read_corpus(corpus_path)?;
    let scat = match &cfg.data.scat {
        Some(p) => read_scat(p)?,
        None => Vec::new(),
    };
    let vocab = match &cfg.data.vocab {
        Some(p) => Vocabulary::load(p)?,
        None => {
            let mut all = docs.clone();
            all.extend(scat_documents(&scat)?);
            build_vocab(&all, cfg.data.min_freq, cfg.data.max_vocab)?
        }
    };
    let start = match &a.init {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            if ckpt.hp.src_vocab != vocab.len() {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint vocabulary size {} differs from {}",
                    ckpt.hp.src_vocab,
                    vocab.len()
                )));
            }
            Start::Pretrained(Box::new(ckpt))
        }
        None => Start::Fresh {
            hp: cfg.model.hyperparams(vocab.len())?,
            init_seed: cfg.model.init_seed,
        },
    };
    let hp = match &start {
        Start::Fresh { hp, .. } => hp.clone(),
        Start::Pretrained(c) => c.hp.clone(),
    };
    let (lambda, _) = cfg.train.effective_mix();
    let targets = if lambda > 0.0 {
        cfg.train.effective_targets(&hp)
    } else {
        Vec::new()
    };
    let data = TrainData::new(&docs, &scat, &vocab, cfg.train.context, &targets, cfg.train.epsilon)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let config_text = cfg.to_toml()?;
    write_atomic(&a.out.join("config.toml"), config_text.as_bytes())?;
    vocab.save(&a.out.join("vocab.txt"))?;
    let outcome = match train(start, &data, &cfg.train, None) {
        Ok(o) => o,
        Err(Error::Diverged { step, last_good }) => {
            save_checkpoint(&last_good, &a.out.join("last_good.ckpt"))?;
            return Err(Error::Diverged { step, last_good });
        }
        Err(e) => return Err(e),
    };
    save_checkpoint(&outcome.checkpoint, &a.out.join("model.ckpt"))?;
    let provenance = Provenance::new(&config_text, cfg.train.seed);
    let mut lines = serde_json::to_string(&provenance)?;
    lines.push('\n');
    lines.push_str(&to_json_lines(&outcome.report.steps)?);
    write_atomic(&a.out.join("train_report.jsonl"), lines.as_bytes())?;
    let r = &outcome.report;
    let last = r.steps.last();
    println!(
        "regime {} lambda {} p_scat {} steps {} rationale batches {:.3} skipped {}",
        r.regime.name(),
        r.lambda,
        r.p_scat,
        r.steps.len(),
        r.scat_fraction(),
        r.skipped_scat
    );
    if let Some(s) = last {
        println!("final loss {:.4} (mt {:.4})", s.loss, s.mt_loss);
    }
    Ok(())
}

fn load_model(a: &ModelArgs) -> Result<(Model, Vocabulary)> {
    let model = load_checkpoint(&a.checkpoint)?.model()?;
    let vocab_path = a.vocab.clone().unwrap_or_else(|| {
        a.checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("vocab.txt")
    });
    let vocab = Vocabulary::load(&vocab_path)?;
    if vocab.len() != model.hp.src_vocab {
        return Err(Error::InvalidConfig(format!(
            "vocabulary size {} differs from the model's {}",
            vocab.len(),
            model.hp.src_vocab
        )));
    }
    Ok((model, vocab))
}

#[derive(Serialize)]
struct AlignBody<'a> {
    examples: usize,
    skipped: &'a BTreeMap<crate::scat::AttnType, usize>,
    csv: String,
}

fn cmd_align_audit(a: &AlignArgs, dir: &Path) -> Result<()> {
    let (model, vocab) = load_model(&a.model)?;
    let examples = read_scat(&a.scat)?;
    let encoded: Vec<EncodedScat> = examples
        .iter()
        .take(a.limit)
        .map(|ex| EncodedScat::new(ex, ex.context_level(), &vocab))
        .collect::<Result<_>>()?;
    let mode = if a.average_heads {
        HeadMode::Averaged
    } else {
        HeadMode::PerHead
    };
    let report: AlignmentReport = sweep(&model, &encoded, mode, a.epsilon)?;
    let csv = report.to_csv();
    write_atomic(&dir.join("align-audit.csv"), csv.as_bytes())?;
    print!("{}", report.to_table());
    write_report(
        dir,
        "align-audit",
        a,
        0,
        AlignBody {
            examples: report.examples,
            skipped: &report.skipped,
            csv,
        },
    )
}

/// Parses `--mask`; `all` expands to the six ablations.
pub fn parse_masks(text: &str) -> Result<Vec<MaskKind>> {
    if text == "all" {
        return Ok(MaskKind::ablations().to_vec());
    }
    text.split(',').map(|m| m.trim().parse()).collect()
}

#[derive(Serialize)]
struct ContrastiveRow {
    mask: String,
    accuracy: f64,
    pairs: usize,
}

fn cmd_contrastive(a: &ContrastiveArgs, dir: &Path) -> Result<()> {
    let masks = parse_masks(&a.mask)?;
    let (model, vocab) = load_model(&a.model)?;
    let examples = parse_contrastive_set(&read_text(&a.set)?)?;
    let mut reports: Vec<ContrastiveReport> = Vec::new();
    // pairs are encoded with each example's own context level
    let mut pairs = Vec::with_capacity(examples.len());
    for ex in &examples {
        pairs.extend(pairs_from_examples(std::slice::from_ref(ex), ex.context_level(), &vocab)?);
    }
    for kind in masks {
        reports.push(contrastive_accuracy(&model, &pairs, &MaskSpec::new(kind, a.seed))?);
    }
    let rows: Vec<ContrastiveRow> = reports
        .iter()
        .map(|r| ContrastiveRow {
            mask: r.mask.label(),
            accuracy: r.accuracy,
            pairs: r.outcomes.len(),
        })
        .collect();
    println!("{:<20} {:>8}", "mask", "accuracy");
    for r in &rows {
        println!("{:<20} {:>8.1}", r.mask, 100.0 * r.accuracy);
    }
    write_atomic(&dir.join("contrastive-outcomes.jsonl"), to_json_lines(&reports)?.as_bytes())?;
    write_report(dir, "contrastive", a, a.seed, serde_json::json!({ "masks": rows }))
}

#[derive(Serialize)]
struct TranslateBody {
    mode: ContextMode,
    sentences: usize,
    bleu: f64,
    f_pronoun: f64,
    f_other: f64,
    pronoun_examples: usize,
    bootstrap_p: Option<f64>,
}

fn cmd_translate(a: &TranslateArgs, dir: &Path) -> Result<()> {
    let mode: ContextMode = a.mode.parse()?;
    if a.beam == 0 {
        return Err(Error::InvalidConfig("beam width must be >= 1".into()));
    }
    let (model, vocab) = load_model(&a.model)?;
    let docs = read_corpus(&a.corpus)?;
    let dc = DecodeConfig {
        method: if a.beam == 1 {
            DecodeMethod::Greedy
        } else {
            DecodeMethod::Beam(a.beam)
        },
        max_len: a.max_len,
    };
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for doc in &docs {
        for h in translate_document(&model, doc, ContextConfig::default(), mode, dc, &vocab)? {
            hyps.push(vocab.decode(&h));
        }
        refs.extend(doc.targets().map(str::to_string));
    }
    let compare = match &a.compare {
        Some(p) => {
            let other: Vec<String> = read_text(p)?.lines().map(str::to_string).collect();
            let metric = |h: &[String], r: &[String]| bleu(h, r).unwrap_or(0.0);
            Some(paired_bootstrap(metric, &other, &hyps, &refs, a.resamples, a.seed)?)
        }
        None => None,
    };
    let score = bleu(&hyps, &refs)?;
    let f = word_fmeasure(&hyps, &refs, &pronoun_set())?;
    let mut text = hyps.join("\n");
    text.push('\n');
    write_atomic(&dir.join(format!("translate-{}.txt", a.mode)), text.as_bytes())?;
    println!("{:<10} {:>8} {:>10} {:>8}", "mode", "BLEU", "f-pronoun", "f-other");
    println!(
        "{:<10} {:>8.2} {:>10.4} {:>8.4}",
        a.mode, score, f.target, f.other
    );
    if let Some(p) = compare {
        println!("bootstrap: this system beats the comparison in {:.1}% of resamples", 100.0 * p);
    }
    write_report(
        dir,
        "translate",
        a,
        a.seed,
        TranslateBody {
            mode,
            sentences: hyps.len(),
            bleu: score,
            f_pronoun: f.target,
            f_other: f.other,
            pronoun_examples: f.target_examples,
            bootstrap_p: compare,
        },
    )
}

#[derive(Serialize)]
struct ForgeBody<'a> {
    groups: &'a [wsd::AmbiguousGroup],
    pairs: usize,
    warnings: &'a [String],
}

fn cmd_forge_wsd(a: &ForgeArgs, dir: &Path) -> Result<()> {
    let docs = wsd::parse_annotations(&read_text(&a.annotations)?)?;
    let alignments = wsd::parse_alignments(&read_text(&a.alignments)?)?;
    let mut warnings = Vec::new();
    if alignments.iter().all(|r| r.links.is_empty()) {
        warnings.push("alignment file has no links; the forged set is empty".to_string());
    }
    let table = if alignments.is_empty() {
        wsd::CountTable::default()
    } else {
        wsd::accumulate_counts(&docs, &alignments)?
    };
    let mut groups = wsd::extract_groups(&table, a.min_count, a.min_targets, a.z);
    let mut pairs = Vec::new();
    match &a.review {
        Some(p) => {
            let review = wsd::parse_review(&read_text(p)?)?;
            groups = wsd::apply_review(groups, &review);
            if !alignments.is_empty() {
                let out = wsd::make_contrastive(&docs, &alignments, &groups, &table, a.window)?;
                pairs = out.pairs;
                warnings.extend(out.warnings);
            }
        }
        None => {
            warnings.push("no review file; writing candidate groups only".to_string());
            write_atomic(&dir.join("wsd-review.txt"), wsd::review_template(&groups).as_bytes())?;
        }
    }
    write_atomic(&dir.join("wsd-contrastive.jsonl"), to_json_lines(&pairs)?.as_bytes())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{:<16} {:<6} {:>8}  targets", "lemma", "POS", "entropy");
    for g in &groups {
        let t: Vec<String> = g.targets.iter().map(|(l, c)| format!("{l}:{c}")).collect();
        println!("{:<16} {:<6} {:>8.4}  {}", g.lemma, g.pos, g.entropy, t.join(" "));
    }
    println!("{} contrastive pairs", pairs.len());
    write_report(
        dir,
        "forge-wsd",
        a,
        0,
        ForgeBody {
            groups: &groups,
            pairs: pairs.len(),
            warnings: &warnings,
        },
    )
}

#[derive(Debug, Serialize)]
pub struct ScatStats {
    pub total: usize,
    pub malformed: usize,
    /// Examples per context level label.
    pub levels: BTreeMap<String, usize>,
    pub histogram: HighlightHistogram,
}

pub fn scat_stats(text: &str) -> ScatStats {
    let (examples, errors) = parse_scat_lenient(text);
    let mut levels = BTreeMap::new();
    for ex in &examples {
        *levels.entry(ex.ctx_level.clone()).or_insert(0) += 1;
    }
    ScatStats {
        total: examples.len(),
        malformed: errors.len(),
        levels,
        histogram: highlight_distance_histogram(&examples),
    }
}

fn cmd_scat_stats(a: &StatsArgs, dir: &Path) -> Result<()> {
    let stats = scat_stats(&read_text(&a.scat)?);
    println!("examples {} (malformed {})", stats.total, stats.malformed);
    println!("{:<10} {:>8}", "level", "count");
    for (l, c) in &stats.levels {
        println!("{l:<10} {c:>8}");
    }
    println!("{:<10} {:>8} {:>8}", "distance", "source", "target");
    let distances: std::collections::BTreeSet<usize> = stats
        .histogram
        .source
        .keys()
        .chain(stats.histogram.target.keys())
        .copied()
        .collect();
    for d in distances {
        let s = stats.histogram.source.get(&d).copied().unwrap_or(0);
        let t = stats.histogram.target.get(&d).copied().unwrap_or(0);
        println!("{d:<10} {s:>8} {t:>8}");
    }
    write_report(dir, "scat-stats", a, 0, stats)
}

fn cmd_convert_scat(a: &ConvertArgs, dir: &Path) -> Result<()> {
    let (examples, report) = convert_release(&a.input)?;
    write_scat(&a.output, &examples)?;
    println!("converted {} examples, skipped {}", report.converted, report.skipped.len());
    write_report(dir, "convert-scat", a, 0, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        let partial = ExperimentConfig::from_toml("[train]\nlambda = 3.0\n").unwrap();
        assert_eq!(partial.train.lambda, 3.0);
        assert_eq!(partial.train.batch_size, TrainConfig::default().batch_size);
        assert!(ExperimentConfig::from_toml("[train]\nlamda = 3.0\n").is_err());
    }

    #[test]
    fn masks_parse() {
        assert_eq!(parse_masks("all").unwrap().len(), 6);
        assert_eq!(parse_masks("none,random:0.2").unwrap().len(), 2);
        assert!(parse_masks("bogus").is_err());
    }

    #[test]
    fn stats_count_malformed() {
        let good = r#"{"id":"1","ctx_src":["a b"],"ctx_tgt":["c d"],"src":"it x","tgt_correct":"il x","tgt_incorrect":"elle x","pron_src_idx":0,"pron_tgt_idx":0,"hl_src":[[-1,0]],"hl_tgt":[[-1,1]],"ctx_level":"1+1","confidence":"high"}"#;
        let s = scat_stats(&format!("{good}\nnot json\n"));
        assert_eq!((s.total, s.malformed), (1, 1));
        assert_eq!(s.histogram.source.get(&1), Some(&1));
        assert_eq!(s.levels.get("1+1"), Some(&1));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(())), 0);
        assert_eq!(exit_code(&Err(Error::InvalidConfig("x".into()))), 1);
        assert_eq!(exit_code(&Err(Error::NonFinite("x".into()))), 2);
    }
}
