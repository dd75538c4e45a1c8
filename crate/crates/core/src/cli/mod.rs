//! Command-line front end. [`run`] maps every outcome to an exit code:
//! 0 success, 1 usage error, 2 data or model error.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bayes::{fit_counts, BayesVariant};
use crate::error::{Error, Result};
use crate::eval::{
    data_hash, emit_report, evaluate_model, infer_relation_arg_types, mean_average_precision, read_entity_types,
    sha256_hex, top_k_relations, EvalOptions, EvalReport, ReportFormat, TypeMap, DEFAULT_TYPE_THRESHOLD,
};
use crate::model::{attention_weights, score, AttentionMode, Model, ModelConfig, ModelKind, PairContext};
use crate::store::{
    ingest_triples, link_mentions, read_raw_triples, split_holdout, EntityId, NeighborIndex, Pair, RelationId,
    RelationKind, SplitSpec, TripleStore, Vocabulary,
};
use crate::synth::{generate_world, WorldConfig};
use crate::trainer::{load_checkpoint, load_config_file, save_checkpoint, train, training_index, Checkpoint, StopReason, TrainConfig, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "openki", version, about = "Align OpenIE predicates to KB relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse KB and OpenIE triple files into a vocabulary and normalized stores.
    Ingest(IngestArgs),
    /// Link raw OpenIE extractions to KB entities.
    Link(LinkArgs),
    /// Hold out KB facts of eligible pairs for validation and test.
    Split(SplitArgs),
    /// Train a model on a split directory and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test (or validation) pairs.
    Eval(EvalArgs),
    /// Bayesian baselines plus embedding models in one report.
    Baseline(BaselineArgs),
    /// Rank KB relations for one entity pair with score breakdowns.
    Predict(PredictArgs),
    /// Generate a synthetic world.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    openie: PathBuf,
    /// Output directory for vocab.tsv, kb.tsv and openie.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LinkArgs {
    /// KB triples whose entity names are the link targets.
    #[arg(long)]
    kb: PathBuf,
    /// Raw extractions with surface-form arguments.
    #[arg(long)]
    openie: PathBuf,
    /// Linked OpenIE triples.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    openie: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of eligible pairs to hold out.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ModelFlags {
    /// Flat key=value configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    attention: Option<AttentionMode>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Split directory written by `split` or `synth`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: Option<ModelKind>,
    #[command(flatten)]
    flags: ModelFlags,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Per-epoch history as JSON lines.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Checkpoint path, rewritten after every epoch.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Entity type TSV enabling argument-type filtering.
    #[arg(long)]
    type_constraints: Option<PathBuf>,
    /// Evaluate on validation instead of test pairs.
    #[arg(long)]
    valid: bool,
    /// Number of query relations (default: 10, or 50 for large vocabularies).
    #[arg(long)]
    top_k: Option<usize>,
    /// Keep the top-N ranked pairs per query in the report.
    #[arg(long)]
    dump_top: Option<usize>,
    /// Report path; `.csv` selects CSV. Printed as JSON when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    /// Embedding models to train alongside the Bayesian baselines.
    #[arg(long, value_delimiter = ',', default_values_t = [ModelKind::E, ModelKind::Rowless])]
    model: Vec<ModelKind>,
    #[command(flatten)]
    flags: ModelFlags,
    #[arg(long)]
    type_constraints: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    subject: String,
    #[arg(long)]
    object: String,
    /// Observed predicates; defaults to those recorded for the pair.
    #[arg(long = "predicate")]
    predicates: Vec<String>,
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    kb_relations: Option<usize>,
    #[arg(long)]
    predicates: Option<usize>,
    #[arg(long)]
    types: Option<usize>,
    #[arg(long)]
    ambiguity: Option<f64>,
    #[arg(long)]
    unseen_rate: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI on `args` (without the program name), printing to the
/// process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv = std::iter::once("openki".to_owned()).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, out),
        Command::Link(a) => link(a, out),
        Command::Split(a) => split(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Baseline(a) => baseline(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Synth(a) => synth(a, out),
    }
}

fn print(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable") + "\n"
}

fn load_stores(kb: &Path, openie: &Path) -> Result<(Vocabulary, TripleStore, TripleStore)> {
    let mut vocab = Vocabulary::new();
    let (kb, _) = ingest_triples(kb, RelationKind::Kb, &mut vocab)?;
    let (openie, _) = ingest_triples(openie, RelationKind::OpenIe, &mut vocab)?;
    Ok((vocab, kb, openie))
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let mut vocab = Vocabulary::new();
    let (kb, kb_stats) = ingest_triples(&a.kb, RelationKind::Kb, &mut vocab)?;
    let (openie, oie_stats) = ingest_triples(&a.openie, RelationKind::OpenIe, &mut vocab)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    vocab.write(&a.out.join("vocab.tsv"))?;
    kb.write_tsv(&a.out.join("kb.tsv"), &vocab)?;
    openie.write_tsv(&a.out.join("openie.tsv"), &vocab)?;
    print(out, &json_line(&serde_json::json!({ "kb": kb_stats, "openie": oie_stats })))
}

fn link(a: LinkArgs, out: &mut dyn Write) -> Result<()> {
    let mut vocab = Vocabulary::new();
    let (kb, _) = ingest_triples(&a.kb, RelationKind::Kb, &mut vocab)?;
    let raw = read_raw_triples(&a.openie)?;
    let linked = link_mentions(&raw, &kb, &mut vocab)?;
    linked.write_tsv(&a.out, &vocab)?;
    print(out, &json_line(&serde_json::json!({ "extractions": raw.len(), "linked": linked.len() })))
}

fn split(a: SplitArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, kb, openie) = load_stores(&a.kb, &a.openie)?;
    let spec = split_holdout(&kb, &openie, a.fraction, a.seed)?;
    spec.write(&a.out, &vocab)?;
    print(
        out,
        &json_line(&serde_json::json!({
            "train": spec.train.len(),
            "valid_pairs": spec.valid_pairs().len(),
            "test_pairs": spec.test_pairs().len(),
        })),
    )
}

fn configs(flags: &ModelFlags, kind: Option<ModelKind>) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    if let Some(path) = &flags.config {
        load_config_file(path, &mut model, &mut train)?;
    }
    if let Some(k) = kind {
        model.kind = k;
    }
    if let Some(att) = flags.attention {
        model.attention = att;
    }
    if let Some(seed) = flags.seed {
        train.seed = seed;
    }
    if let Some(n) = flags.max_epochs {
        train.max_epochs = n;
    }
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

/// Hash of the model and training configuration.
pub fn config_hash(model: &ModelConfig, train: &TrainConfig) -> String {
    sha256_hex(json_line(&(model, train)).as_bytes())
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, spec) = SplitSpec::read(&a.data)?;
    let mut trainer = match &a.resume {
        Some(path) => {
            let mut t = load_checkpoint(path)?.into_trainer(&vocab, &spec)?;
            if let Some(n) = a.flags.max_epochs {
                t.train_config.max_epochs = n;
                if t.history.stop_reason == Some(StopReason::MaxEpochs) {
                    t.history.stop_reason = None;
                }
            }
            t
        }
        None => {
            let (model, train) = configs(&a.flags, a.model)?;
            Trainer::new(&vocab, &spec, model, train)?
        }
    };
    while let Some(record) = trainer.step()? {
        let line = json_line(record);
        save_checkpoint(&a.out, &Checkpoint::from_trainer(&trainer, &vocab))?;
        print(out, &line)?;
    }
    save_checkpoint(&a.out, &Checkpoint::from_trainer(&trainer, &vocab))?;
    if let Some(path) = &a.history {
        fs::write(path, trainer.history.to_json_lines()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn type_map(path: Option<&Path>, vocab: &Vocabulary, spec: &SplitSpec) -> Result<Option<TypeMap>> {
    let Some(path) = path else { return Ok(None) };
    let entity_types = read_entity_types(path, vocab)?;
    let kb = spec.train.filtered(|t| t.source == RelationKind::Kb);
    Ok(Some(infer_relation_arg_types(&kb, &entity_types, DEFAULT_TYPE_THRESHOLD)))
}

fn write_report(report: &EvalReport, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => emit_report(report, p, ReportFormat::from_path(p)),
        None => print(out, &report.to_json()?),
    }
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, spec) = SplitSpec::read(&a.data)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    ckpt.check_vocab(&vocab)?;
    let types = type_map(a.type_constraints.as_deref(), &vocab, &spec)?;
    let (truth, pairs) = if a.valid {
        (&spec.valid, spec.valid_pairs())
    } else {
        (&spec.test, spec.test_pairs())
    };
    let queries = top_k_relations(&spec.train, &vocab, a.top_k);
    let index = training_index(&spec, &ckpt.model_config);
    let model = Model::new(ckpt.final_params(), &ckpt.model_config, &index);
    let options = EvalOptions {
        types: types.as_ref(),
        dump_top: a.dump_top,
    };
    let mut report = evaluate_model(model, truth, &pairs, &queries, &vocab, options);
    report.config_hash = config_hash(&ckpt.model_config, &ckpt.train_config);
    report.data_hash = data_hash(&vocab, &[&spec.train, truth]);
    write_report(&report, a.out.as_deref(), out)
}

/// Side-by-side scores of several methods on the same test pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineReport {
    pub data_hash: String,
    pub k: usize,
    pub methods: Vec<MethodScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodScore {
    pub method: String,
    pub config_hash: String,
    pub map: f64,
    pub auc_pr: f64,
}

impl BaselineReport {
    fn to_csv(&self) -> String {
        let mut s = String::from("method,map,auc_pr\n");
        for m in &self.methods {
            s.push_str(&format!("{},{},{}\n", m.method, m.map, m.auc_pr));
        }
        s
    }
}

fn baseline(a: BaselineArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, spec) = SplitSpec::read(&a.data)?;
    let types = type_map(a.type_constraints.as_deref(), &vocab, &spec)?;
    let pairs = spec.test_pairs();
    let queries = top_k_relations(&spec.train, &vocab, a.top_k);
    let options = EvalOptions {
        types: types.as_ref(),
        dump_top: None,
    };
    let mut methods = Vec::new();
    let counts = fit_counts(&spec.train, &vocab);
    let index = NeighborIndex::build(&spec.train);
    for variant in BayesVariant::ALL {
        let scorer = |(s, o): Pair, q: RelationId| variant.score(&counts, &index, s, o, q);
        let r = mean_average_precision(scorer, &spec.test, &pairs, &queries, &vocab, options);
        methods.push(MethodScore {
            method: variant.name().to_owned(),
            config_hash: sha256_hex(format!("{}\tdelta={}", variant.name(), counts.delta).as_bytes()),
            map: r.map,
            auc_pr: r.auc_pr,
        });
    }
    let mut seen = BTreeSet::new();
    for kind in a.model.iter().copied().filter(|k| seen.insert(*k)) {
        let (model_cfg, train_cfg) = configs(&a.flags, Some(kind))?;
        let trained = train(&vocab, &spec, &model_cfg, &train_cfg)?;
        let index = training_index(&spec, &model_cfg);
        let model = Model::new(&trained.params, &model_cfg, &index);
        let r = evaluate_model(model, &spec.test, &pairs, &queries, &vocab, options);
        methods.push(MethodScore {
            method: model_cfg.label(),
            config_hash: config_hash(&model_cfg, &train_cfg),
            map: r.map,
            auc_pr: r.auc_pr,
        });
    }
    let report = BaselineReport {
        data_hash: data_hash(&vocab, &[&spec.train, &spec.test]),
        k: queries.len(),
        methods,
    };
    match &a.out {
        Some(p) => {
            let text = match ReportFormat::from_path(p) {
                ReportFormat::Csv => report.to_csv(),
                ReportFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
            };
            fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => print(out, &(serde_json::to_string_pretty(&report)? + "\n")),
    }
}

#[derive(Serialize)]
struct Prediction<'a> {
    rank: usize,
    relation: &'a str,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    breakdown: Option<Breakdown>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    attention: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct Breakdown {
    s_att: Option<f64>,
    s_ene_subj: f64,
    s_ene_obj: f64,
    normalized: [f64; 3],
    gate_weights: [f64; 3],
}

/// Entity id for `name`; names outside the vocabulary get a fresh id with
/// no parameters and no neighborhood.
fn entity_or_fresh(vocab: &Vocabulary, name: &str, offset: u32) -> EntityId {
    vocab
        .entity_id(name)
        .unwrap_or(EntityId(vocab.num_entities() as u32 + offset))
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let (vocab, spec) = SplitSpec::read(&a.data)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    ckpt.check_vocab(&vocab)?;
    let index = training_index(&spec, &ckpt.model_config);
    let params = ckpt.final_params();
    let config = &ckpt.model_config;
    let s = entity_or_fresh(&vocab, &a.subject, 0);
    let o = entity_or_fresh(&vocab, &a.object, 1);
    let mut ctx = PairContext::full(&index, s, o);
    if !a.predicates.is_empty() {
        ctx.pair_relations = a
            .predicates
            .iter()
            .map(|p| {
                vocab.relation_id(p).ok_or_else(|| Error::Unknown {
                    what: "predicate",
                    name: p.clone(),
                })
            })
            .collect::<Result<_>>()?;
    }
    let mut scored: Vec<(RelationId, f64)> = vocab
        .kb_relations()
        .into_iter()
        .map(|r| Ok((r, score(params, config, &ctx, r)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let named = |r: RelationId| vocab.relation_name(r).to_owned();
    for (rank, &(r, total)) in scored.iter().take(a.top).enumerate() {
        let (breakdown, attention) = match config.kind {
            ModelKind::OpenKi => {
                let b = crate::model::score_openki(params, &ctx, r, config.attention);
                let att = b.attention_weights.iter().map(|&(p, w)| (named(p), w)).collect();
                let parts = Breakdown {
                    s_att: b.s_att,
                    s_ene_subj: b.s_ene_subj,
                    s_ene_obj: b.s_ene_obj,
                    normalized: b.normalized,
                    gate_weights: b.gate_weights,
                };
                (Some(parts), att)
            }
            ModelKind::Rowless => {
                let w = attention_weights(params, &ctx, r, config.attention)?;
                (None, ctx.pair_relations.iter().map(|&p| named(p)).zip(w).collect())
            }
            _ => (None, Vec::new()),
        };
        let line = json_line(&Prediction {
            rank: rank + 1,
            relation: vocab.relation_name(r),
            score: total,
            breakdown,
            attention,
        });
        print(out, &line)?;
    }
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = WorldConfig {
        seed: a.seed,
        ..WorldConfig::default()
    };
    if let Some(v) = a.entities {
        cfg.num_entities = v;
    }
    if let Some(v) = a.kb_relations {
        cfg.num_kb_relations = v;
    }
    if let Some(v) = a.predicates {
        cfg.num_predicates = v;
    }
    if let Some(v) = a.types {
        cfg.num_types = v;
    }
    if let Some(v) = a.ambiguity {
        cfg.ambiguity = v;
    }
    if let Some(v) = a.unseen_rate {
        cfg.unseen_entity_rate = v;
    }
    if let Some(v) = a.noise {
        cfg.noise_rate = v;
    }
    if let Some(v) = a.fraction {
        cfg.held_out_fraction = v;
    }
    let world = generate_world(&cfg)?;
    world.write(&a.out)?;
    print(
        out,
        &json_line(&serde_json::json!({
            "kb": world.kb.len(),
            "openie": world.openie.len(),
            "test_pairs": world.split.test_pairs().len(),
            "test_unseen_rate": world.test_unseen_rate(),
        })),
    )
}
