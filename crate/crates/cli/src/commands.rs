use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lexlabel::annotator::{BatchMode, ItemFailure};
use lexlabel::audit::{audit_predictions, AuditReport, TaxonomyMatcher};
use lexlabel::cost::{cost_report, CostParams, CostReport, Preset};
use lexlabel::dataset::{corpus_stats, load_documents, load_taxonomy, split_corpus, write_documents, write_taxonomy};
use lexlabel::dataset::{CorpusStats, GoldPolicy, SplitSpec};
use lexlabel::gateway::vecfile::{write_atomic, write_vector_file};
use lexlabel::gateway::{EmbeddingSource, OpenSource};
use lexlabel::metrics::{evaluate, EvalReport, MacroUniverse};
use lexlabel::model::PredictionRecord;
use lexlabel::scaling::{run_scaling, ScalingReport, ScalingSpec};
use lexlabel::synthetic::{clustered_corpus, exact_geometry, ClusterSpec};
use lexlabel::tuner::{parse_k_grid, tune_k, Objective, TuningReport, TuningSpec};
use lexlabel::{
    load_index, predict_batch, save_index, AnnotatorConfig, DocumentRecord, Embedding, LabelId, OutputSize,
    PredictionSet, ScoredLabel, SemanticIndex, Strategy, Target, Taxonomy, TrainingCorpusIndex,
};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::failure::CliError;
use crate::manifest::{default_path, ManifestBuilder};
use crate::settings::*;
use crate::table::{pct, Table};

pub type CmdResult = Result<(), CliError>;

/// Settings shared by every command.
pub struct Ctx {
    pub file: FileConfig,
    pub json: bool,
    pub manifest: Option<PathBuf>,
}

impl Ctx {
    /// Prints the report, writes it to `out` when given, then writes the
    /// manifest to `--manifest` or next to `out`.
    fn finish<R: Serialize>(
        &self,
        mut m: ManifestBuilder,
        report: &R,
        human: String,
        out: Option<&Path>,
        primary_output: Option<&Path>,
    ) -> CmdResult {
        if let Some(out) = out {
            write_json(out, report)?;
            m.output("report", out);
        }
        if self.json {
            println!("{}", serde_json::to_string_pretty(report).expect("serializable report"));
        } else {
            print!("{human}");
        }
        let manifest_path = self
            .manifest
            .clone()
            .or_else(|| primary_output.or(out).map(default_path));
        if let Some(path) = manifest_path {
            m.finish()?.write(&path)?;
        }
        Ok(())
    }
}

fn write_json<R: Serialize>(path: &Path, value: &R) -> CmdResult {
    let mut json = serde_json::to_string_pretty(value).expect("serializable report");
    json.push('\n');
    write_atomic(path, json.as_bytes())?;
    Ok(())
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn strategy_of(s: StrategyArg) -> Strategy {
    match s {
        StrategyArg::LabelSimilarity => Strategy::LabelSimilarity,
        StrategyArg::NeighborVote => Strategy::NeighborVote,
    }
}

fn objective_of(o: ObjectiveArg) -> Objective {
    match o {
        ObjectiveArg::MicroF1 => Objective::MicroF1,
        ObjectiveArg::MacroF1 => Objective::MacroF1,
    }
}

fn universe_of(u: UniverseArg) -> MacroUniverse {
    match u {
        UniverseArg::GoldSupported => MacroUniverse::GoldSupported,
        UniverseArg::FullTaxonomy => MacroUniverse::FullTaxonomy,
    }
}

/// Opens the vector file when given, else the configured embedder.
fn open_source(
    vectors: Option<&Path>,
    embed: Option<&EmbedChoice>,
    expected_dim: Option<usize>,
    what: &str,
    m: &mut ManifestBuilder,
) -> Result<OpenSource, CliError> {
    if let Some(path) = vectors {
        m.input(&format!("{what}_vectors"), path)?;
        let source = EmbeddingSource::VectorFile {
            path: path.to_owned(),
            expected_dim,
        };
        return Ok(source.open()?);
    }
    match embed {
        Some(choice) => choice.open(expected_dim),
        None => Err(config_error(format!(
            "{what} embeddings need a vector file, --service-url or --hashing-dim"
        ))),
    }
}

fn attach_embeddings(docs: &mut [DocumentRecord], source: &OpenSource) -> CmdResult {
    let items: Vec<(&str, &str)> = docs.iter().map(|d| (d.id.as_str(), d.text.as_str())).collect();
    let embeddings = source.embed_items(&items)?;
    for (d, e) in docs.iter_mut().zip(embeddings) {
        d.embedding = Some(e);
    }
    Ok(())
}

/// Embeds what it can, reporting per-document failures instead of aborting.
fn attach_embeddings_lenient(docs: &mut [DocumentRecord], source: &OpenSource) -> Result<Vec<ItemFailure>, CliError> {
    let mut failures = Vec::new();
    let failed = |d: &DocumentRecord, e: lexlabel::Error| ItemFailure {
        doc_id: d.id.clone(),
        kind: e.kind(),
        message: e.to_string(),
    };
    match source {
        OpenSource::Vectors { .. } => {
            for d in docs.iter_mut() {
                match source.embed_items(&[(d.id.as_str(), "")]) {
                    Ok(mut v) => d.embedding = v.pop(),
                    Err(e) => failures.push(failed(d, e)),
                }
            }
        }
        OpenSource::Gateway(_) => {
            let mut ok = Vec::new();
            for (i, d) in docs.iter().enumerate() {
                if d.text.trim().is_empty() {
                    failures.push(failed(d, lexlabel::Error::EmptyText { index: i }));
                } else {
                    ok.push(i);
                }
            }
            let items: Vec<(&str, &str)> = ok
                .iter()
                .map(|&i| (docs[i].id.as_str(), docs[i].text.as_str()))
                .collect();
            let embeddings = source.embed_items(&items)?;
            for (i, e) in ok.into_iter().zip(embeddings) {
                docs[i].embedding = Some(e);
            }
        }
    }
    Ok(failures)
}

fn embed_choice(ctx: &Ctx, args: &EmbedArgs) -> Option<EmbedChoice> {
    EmbedChoice::resolve(args, &ctx.file.embedding)
}

fn label_embeddings(
    taxonomy: &mut Taxonomy,
    vectors: Option<&Path>,
    embed: Option<&EmbedChoice>,
    m: &mut ManifestBuilder,
) -> Result<Option<lexlabel::gateway::GatewayStats>, CliError> {
    let source = open_source(vectors, embed, None, "label", m)?;
    let items: Vec<(String, String)> = taxonomy
        .entries()
        .map(|e| (e.id.to_string(), e.description.clone()))
        .collect();
    let refs: Vec<(&str, &str)> = items.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let embeddings = source.embed_items(&refs)?;
    taxonomy.set_embeddings(embeddings)?;
    Ok(match source {
        OpenSource::Gateway(g) => Some(g.stats()),
        OpenSource::Vectors { .. } => None,
    })
}

fn k_from_report(path: &Path, m: &mut ManifestBuilder) -> Result<usize, CliError> {
    m.input("k_from", path)?;
    let text = std::fs::read_to_string(path).map_err(|e| lexlabel::Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let report: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| lexlabel::Error::InvalidInput(format!("{}: {e}", path.display())))?;
    report["best_k"]
        .as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| lexlabel::Error::InvalidInput(format!("{}: no best_k field", path.display())).into())
}

/// Annotator settings resolved from flags, file and defaults.
fn annotator_config(ctx: &Ctx, s: &StrategyArgs, k: usize) -> Result<AnnotatorConfig, CliError> {
    let strategy = pick(s.strategy, ctx.file.strategy, StrategyArg::LabelSimilarity);
    let threshold = s.threshold.or(ctx.file.threshold);
    let config = AnnotatorConfig {
        strategy: strategy_of(strategy),
        k,
        vote_neighbors: pick(s.vote_neighbors, ctx.file.vote_neighbors, DEFAULT_VOTE_NEIGHBORS),
        output_size: match threshold {
            Some(t) if t.is_finite() => OutputSize::Threshold(t),
            Some(t) => return Err(config_error(format!("threshold must be finite, got {t}"))),
            None => OutputSize::FixedK,
        },
    };
    config.validate()?;
    Ok(config)
}

/// Loads and embeds the training corpus that neighbor voting searches.
fn training_corpus(
    s: &StrategyArgs,
    taxonomy: &Taxonomy,
    source: &OpenSource,
    m: &mut ManifestBuilder,
) -> Result<TrainingCorpusIndex, CliError> {
    let path = s
        .train_docs
        .as_deref()
        .ok_or_else(|| config_error("neighbor-vote needs --train-docs"))?;
    m.input("train_docs", path)?;
    let mut docs = load_documents(path, taxonomy, GoldPolicy::Strict)?.docs;
    attach_embeddings(&mut docs, source)?;
    Ok(TrainingCorpusIndex::build(&docs, taxonomy)?)
}

fn config_json(strategy: &AnnotatorConfig, embed: &Option<EmbedChoice>) -> serde_json::Value {
    json!({ "annotator": strategy, "embedding": embed })
}

pub fn index_build(ctx: &Ctx, a: &IndexBuildArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("index build");
    m.input("taxonomy", &a.taxonomy)?;
    let embed = embed_choice(ctx, &a.embed);
    m.config(json!({ "embedding": embed }));
    let mut taxonomy = load_taxonomy(&a.taxonomy)?;
    let stats = label_embeddings(&mut taxonomy, a.label_vectors.as_deref(), embed.as_ref(), &mut m)?;
    let index = SemanticIndex::build(&taxonomy)?;
    save_index(&a.out, &taxonomy, &index)?;
    m.output("index", &a.out);

    let s = index.stats();
    let mut human = Table::new(&["labels", "dim", "version"]);
    human.row(&[s.labels.to_string(), s.dim.to_string(), s.version.to_string()]);
    let mut text = human.render();
    if let Some(g) = stats {
        text.push_str(&format!(
            "embedding calls: {}, texts sent: {}, cache hits: {}\n",
            g.remote_calls, g.texts_sent, g.cache_hits
        ));
    }
    text.push_str(&format!("index written to {}\n", a.out.display()));
    ctx.finish(m, &s, text, None, Some(&a.out))
}

#[derive(Serialize)]
struct PredictSummary<'a> {
    strategy: Strategy,
    k: usize,
    n_docs: usize,
    n_predicted: usize,
    failures: &'a [ItemFailure],
}

pub fn predict(ctx: &Ctx, a: &PredictArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("predict");
    m.input("index", &a.index)?;
    m.input("docs", &a.docs)?;
    let k = match &a.k_from {
        Some(p) => k_from_report(p, &mut m)?,
        None => pick(a.k, ctx.file.k, DEFAULT_K),
    };
    let config = annotator_config(ctx, &a.strategy, k)?;
    let embed = embed_choice(ctx, &a.embed);
    m.config(config_json(&config, &embed));

    let (taxonomy, index) = load_index(&a.index)?;
    let source = open_source(
        a.doc_vectors.as_deref(),
        embed.as_ref(),
        Some(index.dim()),
        "doc",
        &mut m,
    )?;
    let mut docs = load_documents(&a.docs, &taxonomy, GoldPolicy::Lenient)?.docs;
    let mode = if a.lenient {
        BatchMode::Lenient
    } else {
        BatchMode::Strict
    };
    let mut failures = match mode {
        BatchMode::Lenient => attach_embeddings_lenient(&mut docs, &source)?,
        BatchMode::Strict => {
            attach_embeddings(&mut docs, &source)?;
            Vec::new()
        }
    };
    let corpus;
    let target = match config.strategy {
        Strategy::LabelSimilarity => Target::Labels(&index),
        Strategy::NeighborVote => {
            corpus = training_corpus(&a.strategy, &taxonomy, &source, &mut m)?;
            Target::Corpus(&corpus)
        }
    };
    let inputs: Vec<(String, Embedding)> = docs
        .iter()
        .filter_map(|d| d.embedding.clone().map(|e| (d.id.clone(), e)))
        .collect();
    let out = predict_batch(&inputs, target, &config, mode)?;
    failures.extend(out.failures);

    let mut lines = Vec::new();
    for p in &out.predictions {
        serde_json::to_writer(&mut lines, &p.to_record()).expect("plain record");
        lines.push(b'\n');
    }
    write_atomic(&a.out, &lines)?;
    m.output("predictions", &a.out);
    for f in &failures {
        eprintln!("{}", serde_json::to_string(f).expect("plain record"));
    }

    let summary = PredictSummary {
        strategy: config.strategy,
        k,
        n_docs: docs.len(),
        n_predicted: out.predictions.len(),
        failures: &failures,
    };
    let mut t = Table::new(&["documents", "predicted", "failed", "k"]);
    t.row(&[docs.len(), out.predictions.len(), failures.len(), k]);
    let human = format!("{}predictions written to {}\n", t.render(), a.out.display());
    ctx.finish(m, &summary, human, None, Some(&a.out))
}

pub fn tune(ctx: &Ctx, a: &TuneArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("tune");
    m.input("index", &a.index)?;
    m.input("val_docs", &a.val_docs)?;
    let grid = a.k_grid.clone().or(ctx.file.k_grid.clone());
    let grid = grid.as_deref().unwrap_or(DEFAULT_K_GRID);
    let k_grid = parse_k_grid(grid)?;
    let base = annotator_config(ctx, &a.strategy, k_grid.last().copied().unwrap_or(1).max(1))?;
    let spec = TuningSpec {
        k_grid,
        objective: objective_of(pick(a.objective, ctx.file.objective, ObjectiveArg::MicroF1)),
        macro_universe: universe_of(pick(
            a.macro_universe,
            ctx.file.macro_universe,
            UniverseArg::GoldSupported,
        )),
        base,
    };
    let embed = embed_choice(ctx, &a.embed);
    m.config(json!({ "tuning": spec, "embedding": embed }));

    let (taxonomy, index) = load_index(&a.index)?;
    let source = open_source(
        a.doc_vectors.as_deref(),
        embed.as_ref(),
        Some(index.dim()),
        "doc",
        &mut m,
    )?;
    let mut val = load_documents(&a.val_docs, &taxonomy, GoldPolicy::Strict)?.docs;
    attach_embeddings(&mut val, &source)?;
    let corpus;
    let target = match spec.base.strategy {
        Strategy::LabelSimilarity => Target::Labels(&index),
        Strategy::NeighborVote => {
            corpus = training_corpus(&a.strategy, &taxonomy, &source, &mut m)?;
            Target::Corpus(&corpus)
        }
    };
    let report = tune_k(&val, target, &taxonomy, &spec)?;
    ctx.finish(m, &report, tuning_table(&report), a.out.as_deref(), None)
}

fn tuning_table(r: &TuningReport) -> String {
    let mut t = Table::new(&["k", "Mi-F1", "Ma-F1", ""]);
    for s in &r.per_k {
        let mark = if s.k == r.best_k { "*" } else { "" };
        t.row(&[s.k.to_string(), pct(s.micro_f1), pct(s.macro_f1), mark.to_string()]);
    }
    format!("{}best k = {}\n", t.render(), r.best_k)
}

/// Reads `predictions.jsonl`. Lines without scores get rank-based scores so
/// that the file's label order is kept.
fn read_predictions(path: &Path) -> Result<Vec<PredictionSet>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| lexlabel::Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let malformed = |message: String| lexlabel::Error::MalformedLine { line: i + 1, message };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictionRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let n = r.labels.len();
        let scores: Vec<f64> = if r.scores.is_empty() {
            (0..n).map(|i| (n - i) as f64).collect()
        } else if r.scores.len() == n {
            r.scores
        } else {
            return Err(malformed(format!("{} labels but {} scores", n, r.scores.len())).into());
        };
        let items = r
            .labels
            .into_iter()
            .zip(scores)
            .map(|(l, score)| {
                Ok(ScoredLabel {
                    label: LabelId::new(l)?,
                    score,
                })
            })
            .collect::<lexlabel::Result<Vec<_>>>()?;
        out.push(PredictionSet::from_items(r.doc_id, items)?);
    }
    Ok(out)
}

pub fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("evaluate");
    m.input("preds", &a.preds)?;
    m.input("gold", &a.gold)?;
    m.input("taxonomy", &a.taxonomy)?;
    let universe = universe_of(pick(
        a.macro_universe,
        ctx.file.macro_universe,
        UniverseArg::GoldSupported,
    ));
    m.config(json!({ "macro_universe": universe }));
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let gold = load_documents(&a.gold, &taxonomy, GoldPolicy::Strict)?.docs;
    let preds = read_predictions(&a.preds)?;
    let report = evaluate(&preds, &gold, &taxonomy, universe)?;
    ctx.finish(m, &report, eval_table(&report), a.out.as_deref(), None)
}

fn eval_table(r: &EvalReport) -> String {
    let mut t = Table::new(&["", "P", "R", "F1"]);
    t.row(&[
        "micro".into(),
        pct(r.micro_precision),
        pct(r.micro_recall),
        pct(r.micro_f1),
    ]);
    t.row(&[
        "macro".into(),
        pct(r.macro_precision),
        pct(r.macro_recall),
        pct(r.macro_f1),
    ]);
    format!("{}documents: {}\n", t.render(), r.n_docs)
}

pub fn audit(ctx: &Ctx, a: &AuditArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("audit");
    m.input("preds", &a.preds)?;
    m.input("taxonomy", &a.taxonomy)?;
    m.config(json!({ "accept_names": a.accept_names }));
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let matcher = if a.accept_names {
        TaxonomyMatcher::accepting_names(&taxonomy)
    } else {
        TaxonomyMatcher::new(&taxonomy)
    };
    let report = audit_predictions(&a.preds, &matcher)?;
    ctx.finish(m, &report, audit_table(&report), a.out.as_deref(), None)
}

fn audit_table(r: &AuditReport) -> String {
    let mut t = Table::new(&["samples", "offending", "rate %", "top hallucinated"]);
    let top: Vec<&str> = r.top_hallucinated.iter().take(2).map(|f| f.label.as_str()).collect();
    t.row(&[
        r.n_samples.to_string(),
        r.n_hallucinating_samples.to_string(),
        r.rate_display(),
        top.join(", "),
    ]);
    let mut s = t.render();
    if !r.near_misses.is_empty() {
        s.push_str(&format!("near misses: {}\n", r.near_misses.len()));
    }
    s
}

#[derive(Serialize)]
struct StatsReport {
    name: String,
    #[serde(flatten)]
    stats: CorpusStats,
}

pub fn stats(ctx: &Ctx, a: &StatsArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("stats");
    m.input("docs", &a.docs)?;
    m.input("taxonomy", &a.taxonomy)?;
    let name = a.name.clone().unwrap_or_else(|| {
        a.docs
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    m.config(json!({ "name": name }));
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let docs = load_documents(&a.docs, &taxonomy, GoldPolicy::Strict)?.docs;
    let stats = corpus_stats(&docs, &taxonomy)?;
    let mut t = Table::new(&["dataset", "docs", "labels", "avg labels/doc"]);
    t.row(&[
        name.clone(),
        stats.n_docs.to_string(),
        stats.cardinality.to_string(),
        stats.avg_labels_display(),
    ]);
    let report = StatsReport { name, stats };
    ctx.finish(m, &report, t.render(), a.out.as_deref(), None)
}

fn preset(name: &str, finetune: bool) -> Result<Preset, CliError> {
    let p = Preset::from_name(name).ok_or_else(|| config_error(format!("unknown cost preset {name:?}")))?;
    if p.is_finetune() != finetune {
        return Err(config_error(format!(
            "preset {name} is a {} preset",
            if p.is_finetune() { "fine-tuning" } else { "retrieval" }
        )));
    }
    Ok(p)
}

pub fn cost(ctx: &Ctx, a: &CostArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("cost");
    let ft_preset = preset(a.ft_preset.as_deref().unwrap_or("lora"), true)?;
    let ret_preset = preset(a.ret_preset.as_deref().unwrap_or("retrieval"), false)?;
    let mut ft = ft_preset.params();
    let mut ret = ret_preset.params();
    let ft_overridden = [a.ft_params, a.train_samples, a.epochs, a.ft_seq_len]
        .iter()
        .any(Option::is_some);
    let ret_overridden = [a.ret_params, a.test_samples, a.ret_seq_len]
        .iter()
        .any(Option::is_some);
    ft.n_params = a.ft_params.unwrap_or(ft.n_params);
    ft.train_samples = a.train_samples.unwrap_or(ft.train_samples);
    ft.epochs = a.epochs.unwrap_or(ft.epochs);
    ft.seq_len = a.ft_seq_len.unwrap_or(ft.seq_len);
    ret.n_params = a.ret_params.unwrap_or(ret.n_params);
    ret.test_samples = a.test_samples.unwrap_or(ret.test_samples);
    ret.seq_len = a.ret_seq_len.unwrap_or(ret.seq_len);
    let note = |p: Preset, overridden: bool| {
        if overridden {
            format!("{} with overridden parameters", p.name())
        } else {
            format!("{}: {}", p.name(), p.provenance())
        }
    };
    let notes = vec![note(ft_preset, ft_overridden), note(ret_preset, ret_overridden)];
    m.config(json!({ "fine_tuning": ft, "retrieval": ret }));
    let report = cost_report(&ft, &ret, notes)?;
    ctx.finish(
        m,
        &report,
        cost_table(&report, ft_preset, ret_preset),
        a.out.as_deref(),
        None,
    )
}

fn cost_table(r: &CostReport, ft: Preset, ret: Preset) -> String {
    let row = |p: &CostParams| format!("{:.1}M", p.n_params / 1e6);
    let mut t = Table::new(&["method", "params", "FLOPs"]);
    t.row(&[ft.name().to_string(), row(&r.ft_params), format!("{:.2e}", r.c_ft)]);
    t.row(&[ret.name().to_string(), row(&r.ret_params), format!("{:.2e}", r.c_ret)]);
    format!("{}ratio: {:.2}x\n", t.render(), r.ratio)
}

#[derive(Serialize)]
struct ScalingOutput {
    primary: ScalingReport,
    /// Label-similarity reference line, when label embeddings are available.
    reference: Option<ScalingReport>,
}

fn parse_sizes(s: &str, n_train: usize) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|p| match p.trim() {
            "full" => Ok(n_train),
            p => p.parse().map_err(|_| config_error(format!("cannot parse size {p:?}"))),
        })
        .collect()
}

pub fn scaling(ctx: &Ctx, a: &ScalingArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("scaling");
    m.input("docs", &a.docs)?;
    m.input("taxonomy", &a.taxonomy)?;
    let seed = pick(a.seed, ctx.file.seed, DEFAULT_SEED);
    m.seed(seed);
    let split = SplitSpec {
        seed,
        train_fraction: pick(a.train_fraction, ctx.file.train_fraction, 0.8),
        val_fraction: pick(a.val_fraction, ctx.file.val_fraction, 0.1),
        subsample_sizes: Vec::new(),
    };
    let strategy = strategy_of(pick(a.strategy, ctx.file.strategy, StrategyArg::NeighborVote));
    let grid = a.k_grid.clone().or(ctx.file.k_grid.clone());
    let mut tuning = TuningSpec::new(AnnotatorConfig {
        strategy,
        k: 1,
        vote_neighbors: pick(a.vote_neighbors, ctx.file.vote_neighbors, DEFAULT_VOTE_NEIGHBORS),
        output_size: OutputSize::FixedK,
    });
    tuning.k_grid = parse_k_grid(grid.as_deref().unwrap_or(DEFAULT_K_GRID))?;
    tuning.objective = objective_of(ctx.file.objective.unwrap_or(ObjectiveArg::MicroF1));
    tuning.macro_universe = universe_of(ctx.file.macro_universe.unwrap_or(UniverseArg::GoldSupported));
    let embed = embed_choice(ctx, &a.embed);

    let mut taxonomy = load_taxonomy(&a.taxonomy)?;
    let mut docs = load_documents(&a.docs, &taxonomy, GoldPolicy::Strict)?.docs;
    let source = open_source(a.doc_vectors.as_deref(), embed.as_ref(), None, "doc", &mut m)?;
    attach_embeddings(&mut docs, &source)?;
    let have_labels = a.label_vectors.is_some() || embed.is_some();
    if have_labels {
        label_embeddings(&mut taxonomy, a.label_vectors.as_deref(), embed.as_ref(), &mut m)?;
    } else if strategy == Strategy::LabelSimilarity {
        return Err(config_error("label-similarity needs --label-vectors or an embedder"));
    }
    let n_train = split_corpus(&docs, &split)?.train.len();
    let sizes_text = a.sizes.clone().or(ctx.file.sizes.clone());
    let sizes = parse_sizes(sizes_text.as_deref().unwrap_or(DEFAULT_SIZES), n_train)?;
    let spec = ScalingSpec { sizes, split, tuning };
    m.config(json!({ "scaling": spec, "embedding": embed }));

    let primary = run_scaling(&docs, &taxonomy, &spec)?;
    let reference = if strategy == Strategy::NeighborVote && have_labels {
        let mut ls = spec.clone();
        ls.tuning.base.strategy = Strategy::LabelSimilarity;
        Some(run_scaling(&docs, &taxonomy, &ls)?)
    } else {
        None
    };
    let output = ScalingOutput { primary, reference };
    ctx.finish(m, &output, scaling_table(&output), a.out.as_deref(), None)
}

fn scaling_table(o: &ScalingOutput) -> String {
    let mut header = vec!["N", "k*", "Mi-F1", "Ma-F1"];
    if o.reference.is_some() {
        header.extend(["ref Mi-F1", "ref Ma-F1"]);
    }
    let mut t = Table::new(&header);
    for (i, r) in o.primary.rows.iter().enumerate() {
        let mut row = vec![r.n.to_string(), r.best_k.to_string(), pct(r.micro_f1), pct(r.macro_f1)];
        if let Some(reference) = &o.reference {
            let rr = &reference.rows[i];
            row.extend([pct(rr.micro_f1), pct(rr.macro_f1)]);
        }
        t.row(&row);
    }
    format!(
        "strategy: {:?}; train {} / val {} / test {}\n{}",
        o.primary.strategy,
        o.primary.n_train,
        o.primary.n_val,
        o.primary.n_test,
        t.render()
    )
}

pub fn serve(ctx: &Ctx, a: &ServeArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("serve");
    let default_k = match &a.k_from {
        Some(p) => k_from_report(p, &mut m)?,
        None => pick(a.k, ctx.file.k, DEFAULT_K),
    };
    let listen = pick(a.listen.clone(), ctx.file.listen.clone(), DEFAULT_LISTEN.to_string());
    let (taxonomy, index) = load_index(&a.index)?;
    let gateway = match embed_choice(ctx, &a.embed) {
        Some(choice) => match choice.open(Some(index.dim()))? {
            OpenSource::Gateway(g) => Some(Arc::new(g)),
            OpenSource::Vectors { .. } => None,
        },
        None => None,
    };
    let state =
        lexlabel_service::AppState::new(taxonomy, index, gateway, lexlabel_service::ServiceConfig { default_k })?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&listen).await?;
        let addr = listener.local_addr()?;
        println!("{}", json!({ "listening": addr.to_string() }));
        tracing::info!(%addr, "annotation service listening");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        lexlabel_service::serve(listener, state, shutdown).await
    })?;
    Ok(())
}

#[derive(Serialize)]
struct SynthReport {
    kind: SynthKind,
    labels: usize,
    docs: usize,
    dim: usize,
    seed: u64,
    files: Vec<String>,
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> CmdResult {
    let mut m = ManifestBuilder::new("synth");
    let seed = pick(a.seed, ctx.file.seed, DEFAULT_SEED);
    m.seed(seed);
    let (taxonomy, docs) = match a.kind {
        SynthKind::Clustered => {
            let d = ClusterSpec::default();
            let spec = ClusterSpec {
                n_labels: a.labels.unwrap_or(d.n_labels),
                dim: a.dim.unwrap_or(d.dim),
                n_docs: a.docs.unwrap_or(d.n_docs),
                max_labels_per_doc: a.labels_per_doc.unwrap_or(d.max_labels_per_doc),
                seed,
                ..d
            };
            if spec.n_labels == 0 || spec.dim == 0 || spec.max_labels_per_doc == 0 {
                return Err(config_error("labels, dim and labels-per-doc must be positive"));
            }
            let c = clustered_corpus(&spec);
            (c.taxonomy, c.docs)
        }
        SynthKind::Exact => {
            let n_labels = a.labels.unwrap_or(20);
            let per_doc = a.labels_per_doc.unwrap_or(3);
            if a.dim.is_some_and(|d| d != n_labels) {
                return Err(config_error("exact geometry uses one dimension per label"));
            }
            if n_labels == 0 || per_doc == 0 || per_doc > n_labels {
                return Err(config_error("need 1 <= labels-per-doc <= labels"));
            }
            let g = exact_geometry(n_labels, a.docs.unwrap_or(1000), per_doc, seed);
            (g.taxonomy, g.docs)
        }
    };
    let dim = taxonomy
        .entries()
        .next()
        .and_then(|e| e.embedding.as_ref())
        .map(Embedding::dim)
        .expect("synthetic labels carry embeddings");
    m.config(json!({
        "kind": a.kind,
        "labels": taxonomy.len(),
        "docs": docs.len(),
        "dim": dim,
        "labels_per_doc": a.labels_per_doc,
    }));

    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| lexlabel::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let paths = [
        dir.join("taxonomy.jsonl"),
        dir.join("docs.jsonl"),
        dir.join("label_vectors.txve"),
        dir.join("doc_vectors.txve"),
    ];
    write_taxonomy(&paths[0], &taxonomy)?;
    write_documents(&paths[1], &docs)?;
    write_vector_file(
        &paths[2],
        dim,
        taxonomy.entries().map(|e| {
            (
                e.id.as_str(),
                e.embedding.as_ref().expect("synthetic labels carry embeddings"),
            )
        }),
    )?;
    write_vector_file(
        &paths[3],
        dim,
        docs.iter().map(|d| {
            (
                d.id.as_str(),
                d.embedding.as_ref().expect("synthetic docs carry embeddings"),
            )
        }),
    )?;
    for p in &paths {
        let role = p.file_stem().expect("named file").to_string_lossy().into_owned();
        m.output(&role, p);
    }
    let report = SynthReport {
        kind: a.kind,
        labels: taxonomy.len(),
        docs: docs.len(),
        dim,
        seed,
        files: paths.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut t = Table::new(&["kind", "labels", "docs", "dim", "seed"]);
    t.row(&[
        format!("{:?}", a.kind).to_lowercase(),
        report.labels.to_string(),
        report.docs.to_string(),
        dim.to_string(),
        seed.to_string(),
    ]);
    let human = format!("{}corpus written to {}\n", t.render(), dir.display());
    let manifest_default = dir.join("manifest.json");
    let ctx_manifest = Ctx {
        file: FileConfig::default(),
        json: ctx.json,
        manifest: Some(ctx.manifest.clone().unwrap_or(manifest_default)),
    };
    ctx_manifest.finish(m, &report, human, None, None)
}
