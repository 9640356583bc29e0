use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use typevec::corpus::{build_type_vocabulary, load_typing_dataset, split_dataset, LoadOptions, TypeVocabulary};
use typevec::reduce::{
    load_mask, make_binary_ned_pairs, project_pairs, prune_top_fraction, save_mask, train_mask, BinaryPair,
    MaskTrainConfig, ReducedVocabulary,
};
use typevec::rules::{apply_rules as apply_rule_set, parse_rules};
use typevec::tasks::{
    cap_evaluate, embed_ned_examples, load_cap_examples, load_ned_examples, most_frequent_accuracy, score_embedded,
    NedLoadOptions, NedOptions, CAP_THRESHOLD,
};
use typevec::tokenize::tokenize;
use typevec::typer::{
    import_external_vectors, load_checkpoint, save_checkpoint, train_with_observer, write_type_vectors, ModelConfig,
    TrainConfig, TypeVector, TyperModel,
};
use typevec::ScoreMode;

use crate::report::{announce, write_report};
use crate::{CliError, Paths};

fn load_model(path: &Path) -> Result<TyperModel, CliError> {
    load_checkpoint(path).map_err(CliError::wrap(format!("loading {}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

// train ---------------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Typing dataset: JSON Lines of {"mention", "context", "types"}.
    #[arg(long)]
    data: PathBuf,
    /// Size of the type vocabulary (most frequent training types).
    #[arg(long, default_value_t = 10_000)]
    types: usize,
    /// Hidden size of the mention encoder.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Hashed word buckets.
    #[arg(long, default_value_t = 65_536)]
    buckets: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Learning rate for embeddings and the encoder layer.
    #[arg(long, default_value_t = 0.1)]
    encoder_lr: f64,
    /// Learning rate for the type embedding matrix.
    #[arg(long, default_value_t = 0.5)]
    type_lr: f64,
    #[arg(long, default_value_t = 0.1)]
    dev_fraction: f64,
    /// Context tokens kept on each side of the mention.
    #[arg(long)]
    window: Option<usize>,
    /// Read at most this many examples.
    #[arg(long)]
    limit: Option<usize>,
    /// Probability above which a type counts as predicted on dev.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint to write.
    #[arg(long, default_value = "model.tvc")]
    out: PathBuf,
    /// JSON report to write.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn train(mut args: TrainArgs, paths: &Paths) -> Result<(), CliError> {
    args.data = paths.input(&args.data);
    let hash = announce("train", &args);
    let examples = load_typing_dataset(
        &args.data,
        LoadOptions {
            limit: args.limit,
            window: args.window,
        },
    )
    .map_err(CliError::wrap(format!("reading {}", args.data.display())))?;
    let (train_set, dev_set) = split_dataset(&examples, args.dev_fraction, args.seed)?;
    let vocab = build_type_vocabulary(&train_set, args.types)?;
    println!(
        "{} training and {} dev examples, {} types",
        train_set.len(),
        dev_set.len(),
        vocab.len()
    );
    let model = TyperModel::new(
        vocab,
        ModelConfig {
            dim: args.dim,
            buckets: args.buckets,
            seed: args.seed,
        },
    )?;
    let config = TrainConfig {
        encoder_lr: args.encoder_lr,
        type_matrix_lr: args.type_lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        threshold: args.threshold,
    };
    let (model, report) = train_with_observer(model, &train_set, &dev_set, &config, |stats| {
        match stats.dev {
            Some(dev) => println!("epoch {} loss {:.6} dev_f1 {:.4}", stats.epoch, stats.mean_loss, dev.f1),
            None => println!("epoch {} loss {:.6}", stats.epoch, stats.mean_loss),
        }
    })?;
    save_checkpoint(&model, &args.out).map_err(CliError::wrap(format!("writing {}", args.out.display())))?;
    if let Some(dev) = report.epochs.last().and_then(|e| e.dev) {
        println!(
            "final dev precision {:.4} recall {:.4} f1 {:.4}",
            dev.precision, dev.recall, dev.f1
        );
    }
    println!("checkpoint written to {}", args.out.display());
    write_report(args.report.as_deref(), "train", &args, &hash, serde_json::to_value(&report).unwrap())
}

// embed ---------------------------------------------------------------------

#[derive(Deserialize)]
struct MentionRecord {
    id: Option<String>,
    mention: String,
    #[serde(default)]
    context: String,
}

struct Mention {
    id: String,
    mention: Vec<String>,
    context: Vec<String>,
}

/// Reads `{"id", "mention", "context"}` lines; missing ids become line numbers.
fn read_mentions(path: &Path) -> Result<Vec<Mention>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MentionRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(Mention {
            id: rec.id.unwrap_or_else(|| (i + 1).to_string()),
            mention: tokenize(&rec.mention),
            context: tokenize(&rec.context),
        });
    }
    Ok(out)
}

#[derive(Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    /// Mentions: JSON Lines of {"id", "mention", "context"}.
    #[arg(long)]
    input: PathBuf,
    /// Vector file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the K most probable types per mention.
    #[arg(long, value_name = "K")]
    top: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn embed(mut args: EmbedArgs, paths: &Paths) -> Result<(), CliError> {
    args.model = paths.input(&args.model);
    args.input = paths.input(&args.input);
    if args.out.is_none() && args.top.is_none() {
        return Err(CliError::usage("embed needs --out, --top or both"));
    }
    let hash = announce("embed", &args);
    let model = load_model(&args.model)?;
    let mentions = read_mentions(&args.input)?;
    let mut vectors = Vec::with_capacity(mentions.len());
    for m in &mentions {
        let t = model
            .embed_mention(&m.mention, &m.context)
            .map_err(CliError::wrap(format!("embedding {:?}", m.id)))?;
        if let Some(k) = args.top {
            let top: Vec<String> = t
                .top_k(k)
                .into_iter()
                .map(|(j, p)| format!("{} ({p:.3})", model.vocab().name(j).unwrap_or("?")))
                .collect();
            println!("{}\t{}", m.id, top.join(", "));
        }
        vectors.push(t);
    }
    if let Some(out) = &args.out {
        let mut w = create(out)?;
        write_type_vectors(&mut w, mentions.iter().map(|m| m.id.as_str()).zip(&vectors))?;
        finish(w, out)?;
        println!("{} vectors of {} types written to {}", vectors.len(), model.vocab().len(), out.display());
    }
    write_report(
        args.report.as_deref(),
        "embed",
        &args,
        &hash,
        json!({"vectors": vectors.len(), "types": model.vocab().len()}),
    )
}

// eval-cap ------------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct EvalCapArgs {
    #[arg(long)]
    model: PathBuf,
    /// CAP pairs: JSON Lines of {"mention1", "context1", "mention2", "context2", "label"}.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = CAP_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn eval_cap(mut args: EvalCapArgs, paths: &Paths) -> Result<(), CliError> {
    args.model = paths.input(&args.model);
    args.data = paths.input(&args.data);
    let hash = announce("eval-cap", &args);
    let model = load_model(&args.model)?;
    let examples = load_cap_examples(&args.data).map_err(CliError::wrap(format!("reading {}", args.data.display())))?;
    let report = cap_evaluate(&model, &examples, args.threshold)?;
    for d in &report.diagnostics {
        log::warn!("{d}");
    }
    println!(
        "accuracy {:.4} ({} of {}); tp {} fp {} tn {} fn {}; errors {}",
        report.accuracy,
        report.correct,
        report.total,
        report.true_positive,
        report.false_positive,
        report.true_negative,
        report.false_negative,
        report.errors
    );
    write_report(args.report.as_deref(), "eval-cap", &args, &hash, serde_json::to_value(&report).unwrap())
}

// eval-ned ------------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct EvalNedArgs {
    /// Model for mention vectors.
    #[arg(long)]
    model: PathBuf,
    /// Model for candidate descriptions; defaults to --model.
    #[arg(long)]
    description_model: Option<PathBuf>,
    /// NED examples as JSON Lines.
    #[arg(long)]
    data: PathBuf,
    /// Rule file; the report then compares accuracy with and without rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Reduced vocabulary file written by `reduce`.
    #[arg(long)]
    reduced: Option<PathBuf>,
    /// Prefix the document title and first sentence to each context.
    #[arg(long)]
    prepend_title: bool,
    /// Reject examples with more candidates than this.
    #[arg(long)]
    max_candidates: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn eval_ned(mut args: EvalNedArgs, paths: &Paths) -> Result<(), CliError> {
    args.model = paths.input(&args.model);
    args.description_model = args.description_model.as_deref().map(|p| paths.input(p));
    args.data = paths.input(&args.data);
    args.rules = args.rules.as_deref().map(|p| paths.input(p));
    args.reduced = args.reduced.as_deref().map(|p| paths.input(p));
    let hash = announce("eval-ned", &args);

    let context_model = load_model(&args.model)?;
    let description_model = match &args.description_model {
        Some(p) => Some(load_model(p)?),
        None => None,
    };
    let description_model = description_model.as_ref().unwrap_or(&context_model);
    if description_model.vocab().id() != context_model.vocab().id() {
        return Err(CliError::data("the two models use different type vocabularies"));
    }
    let vocab = context_model.vocab();
    let examples = load_ned_examples(
        &args.data,
        NedLoadOptions {
            max_candidates: args.max_candidates,
        },
    )
    .map_err(CliError::wrap(format!("reading {}", args.data.display())))?;
    if examples.is_empty() {
        return Err(CliError::data(format!("{} has no examples", args.data.display())));
    }
    let rules = match &args.rules {
        Some(p) => {
            let set = parse_rules(p).map_err(CliError::wrap(format!("reading {}", p.display())))?;
            Some(set.resolve(vocab))
        }
        None => None,
    };
    let reduced = match &args.reduced {
        Some(p) => Some(ReducedVocabulary::load(p, vocab).map_err(CliError::wrap(format!("reading {}", p.display())))?),
        None => None,
    };

    let embedded = embed_ned_examples(&context_model, description_model, &examples, args.prepend_title);
    let base = score_embedded(
        &embedded,
        &NedOptions {
            rules: None,
            reduced: reduced.as_ref(),
            prepend_title: args.prepend_title,
        },
    );
    for d in &base.diagnostics {
        log::warn!("{d}");
    }
    let most_frequent = most_frequent_accuracy(&examples)?;
    println!("most frequent baseline accuracy {most_frequent:.4}");
    println!("accuracy {:.4} ({} of {}); errors {}", base.accuracy, base.correct, base.total, base.errors);
    let mut results = json!({
        "accuracy": base.accuracy,
        "correct": base.correct,
        "total": base.total,
        "errors": base.errors,
        "most_frequent_accuracy": most_frequent,
        "predictions": base.predictions,
    });
    if let Some(rules) = &rules {
        let fixed = score_embedded(
            &embedded,
            &NedOptions {
                rules: Some(rules),
                reduced: reduced.as_ref(),
                prepend_title: args.prepend_title,
            },
        );
        let delta = fixed.accuracy - base.accuracy;
        println!(
            "with rules accuracy {:.4} ({} of {}); delta {delta:+.4}",
            fixed.accuracy, fixed.correct, fixed.total
        );
        results["with_rules"] = json!({
            "accuracy": fixed.accuracy,
            "correct": fixed.correct,
            "errors": fixed.errors,
            "predictions": fixed.predictions,
            "warnings": rules.warnings,
        });
        results["delta"] = json!(delta);
    }
    write_report(args.report.as_deref(), "eval-ned", &args, &hash, results)
}

// reduce --------------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    /// CAP pairs to learn from (dot scoring by default).
    #[arg(long, conflicts_with = "ned", required_unless_present = "ned")]
    cap: Option<PathBuf>,
    /// NED examples to learn from, turned into positive and random negative pairs (cosine scoring by default).
    #[arg(long)]
    ned: Option<PathBuf>,
    /// Scoring function: dot or cosine.
    #[arg(long)]
    scorer: Option<ScoreMode>,
    /// Fraction of types to keep.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// L1 penalty on the mask.
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Minibatch size; full batch when absent.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Share of pairs held out to measure accuracy before and after pruning.
    #[arg(long, default_value_t = 0.2)]
    dev_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "mask.jsonl")]
    mask_out: PathBuf,
    #[arg(long, default_value = "reduced.json")]
    vocab_out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn cap_pairs(model: &TyperModel, path: &Path) -> Result<Vec<BinaryPair>, CliError> {
    let examples = load_cap_examples(path).map_err(CliError::wrap(format!("reading {}", path.display())))?;
    let mut pairs = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        let ctx = format!("embedding pair {}", i + 1);
        let left = model.embed_mention(&ex.mention1, &ex.context1).map_err(CliError::wrap(&ctx))?;
        let right = model.embed_mention(&ex.mention2, &ex.context2).map_err(CliError::wrap(&ctx))?;
        pairs.push(BinaryPair::new(left, right, ex.coreferent)?);
    }
    Ok(pairs)
}

fn ned_pairs(model: &TyperModel, path: &Path, seed: u64) -> Result<Vec<BinaryPair>, CliError> {
    let examples =
        load_ned_examples(path, NedLoadOptions::default()).map_err(CliError::wrap(format!("reading {}", path.display())))?;
    let mut instances = Vec::with_capacity(examples.len());
    for (i, r) in embed_ned_examples(model, model, &examples, false).into_iter().enumerate() {
        match r {
            Ok(inst) => instances.push(inst),
            Err(e) => log::warn!("skipping example {}: {e}", i + 1),
        }
    }
    let (pairs, skipped) = make_binary_ned_pairs(&instances, seed)?;
    if skipped > 0 {
        log::warn!("{skipped} examples with a single candidate were skipped");
    }
    Ok(pairs)
}

pub fn reduce(mut args: ReduceArgs, paths: &Paths) -> Result<(), CliError> {
    args.model = paths.input(&args.model);
    args.cap = args.cap.as_deref().map(|p| paths.input(p));
    args.ned = args.ned.as_deref().map(|p| paths.input(p));
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        return Err(CliError::usage("--fraction must lie in (0, 1]"));
    }
    let scorer = args.scorer.unwrap_or(if args.cap.is_some() {
        ScoreMode::Dot
    } else {
        ScoreMode::Cosine
    });
    args.scorer = Some(scorer);
    let hash = announce("reduce", &args);

    let model = load_model(&args.model)?;
    let pairs = match (&args.cap, &args.ned) {
        (Some(p), _) => cap_pairs(&model, p)?,
        (None, Some(p)) => ned_pairs(&model, p, args.seed)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let (train_pairs, dev_pairs) = split_dataset(&pairs, args.dev_fraction, args.seed)?;
    let config = MaskTrainConfig {
        lambda_l1: args.lambda,
        lr: args.lr,
        epochs: args.epochs,
        seed: args.seed,
        scorer,
        batch_size: args.batch_size,
    };
    let outcome = train_mask(&train_pairs, &config)?;
    let full_acc = outcome.scorer.accuracy(&dev_pairs)?;
    let reduced = prune_top_fraction(&outcome.scorer.mask, args.fraction, model.vocab())?;
    let refit = train_mask(&project_pairs(&train_pairs, &reduced)?, &config)?;
    let reduced_acc = refit.scorer.accuracy(&project_pairs(&dev_pairs, &reduced)?)?;

    save_mask(&args.mask_out, &outcome.scorer, &config, model.vocab())
        .map_err(CliError::wrap(format!("writing {}", args.mask_out.display())))?;
    reduced
        .save(&args.vocab_out)
        .map_err(CliError::wrap(format!("writing {}", args.vocab_out.display())))?;
    println!(
        "mask sparsity {:.4}; kept {} of {} types",
        outcome.sparsity,
        reduced.len(),
        model.vocab().len()
    );
    println!(
        "held-out accuracy {full_acc:.4} with the full mask, {reduced_acc:.4} on the reduced types ({:+.4})",
        reduced_acc - full_acc
    );
    write_report(
        args.report.as_deref(),
        "reduce",
        &args,
        &hash,
        json!({
            "train_pairs": train_pairs.len(),
            "dev_pairs": dev_pairs.len(),
            "sparsity": outcome.sparsity,
            "kept_types": reduced.len(),
            "parent_types": model.vocab().len(),
            "full_accuracy": full_acc,
            "reduced_accuracy": reduced_acc,
            "final_objective": outcome.objective.last(),
        }),
    )
}

// apply-rules ---------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct ApplyRulesArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Vector file to rewrite.
    #[arg(long)]
    vectors: PathBuf,
    /// Mention and context per vector id: JSON Lines of {"id", "mention", "context"}.
    #[arg(long)]
    mentions: PathBuf,
    /// Checkpoint that supplies the type vocabulary (and the type matrix for hidden vectors).
    #[arg(long, required_unless_present = "vocab")]
    model: Option<PathBuf>,
    /// Type vocabulary file, when no checkpoint is given.
    #[arg(long, conflicts_with = "model")]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn apply_rules(mut args: ApplyRulesArgs, paths: &Paths) -> Result<(), CliError> {
    args.rules = paths.input(&args.rules);
    args.vectors = paths.input(&args.vectors);
    args.mentions = paths.input(&args.mentions);
    args.model = args.model.as_deref().map(|p| paths.input(p));
    args.vocab = args.vocab.as_deref().map(|p| paths.input(p));
    let hash = announce("apply-rules", &args);

    let model = match &args.model {
        Some(p) => Some(load_model(p)?),
        None => None,
    };
    let vocab: TypeVocabulary = match (&model, &args.vocab) {
        (Some(m), _) => m.vocab().clone(),
        (None, Some(p)) => TypeVocabulary::load(p).map_err(CliError::wrap(format!("reading {}", p.display())))?,
        (None, None) => unreachable!("clap requires a vocabulary source"),
    };
    let rules = parse_rules(&args.rules)
        .map_err(CliError::wrap(format!("reading {}", args.rules.display())))?
        .resolve(&vocab);
    let store = import_external_vectors(&args.vectors, &vocab, model.as_ref().map(TyperModel::dim))
        .map_err(CliError::wrap(format!("reading {}", args.vectors.display())))?;
    let mentions: HashMap<String, Mention> =
        read_mentions(&args.mentions)?.into_iter().map(|m| (m.id.clone(), m)).collect();

    let mut edited: Vec<(String, TypeVector)> = Vec::with_capacity(store.len());
    let mut fired = 0;
    for (id, _) in store.iter() {
        let m = mentions
            .get(id)
            .ok_or_else(|| CliError::data(format!("no mention for vector {id:?} in {}", args.mentions.display())))?;
        let t = store
            .type_vector(id, model.as_ref())?
            .expect("id comes from the store");
        if !rules.matching(&m.mention, &m.context).is_empty() {
            fired += 1;
        }
        edited.push((id.to_owned(), apply_rule_set(&t, &rules, &m.mention, &m.context)?));
    }
    let mut w = create(&args.out)?;
    write_type_vectors(&mut w, edited.iter().map(|(id, t)| (id.as_str(), t)))?;
    finish(w, &args.out)?;
    println!(
        "{} vectors rewritten to {}; rules matched {fired} of them",
        edited.len(),
        args.out.display()
    );
    write_report(
        args.report.as_deref(),
        "apply-rules",
        &args,
        &hash,
        json!({"vectors": edited.len(), "matched": fired, "warnings": rules.warnings}),
    )
}

// inspect -------------------------------------------------------------------

#[derive(Args, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Mask file to list by weight magnitude.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Number of types to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn inspect(mut args: InspectArgs, paths: &Paths) -> Result<(), CliError> {
    args.model = paths.input(&args.model);
    args.mask = args.mask.as_deref().map(|p| paths.input(p));
    let hash = announce("inspect", &args);
    let model = load_model(&args.model)?;
    let vocab = model.vocab();
    let config = model.config();
    let params = model.embeddings().len() + model.projection().len() + model.bias().len() + model.type_matrix().len();
    println!(
        "{} types, dim {}, {} buckets, seed {}, {params} parameters, vocabulary id {:016x}",
        vocab.len(),
        config.dim,
        config.buckets,
        config.seed,
        vocab.id().0
    );
    let frequent: Vec<_> = vocab
        .types()
        .iter()
        .zip(vocab.counts())
        .take(args.top)
        .map(|(name, count)| json!({"type": name, "count": count}))
        .collect();
    for f in &frequent {
        println!("  {}\t{}", f["type"].as_str().unwrap(), f["count"]);
    }
    let mut results = json!({
        "types": vocab.len(),
        "dim": config.dim,
        "buckets": config.buckets,
        "seed": config.seed,
        "parameters": params,
        "vocab_id": format!("{:016x}", vocab.id().0),
        "most_frequent_types": frequent,
    });
    if let Some(path) = &args.mask {
        let (header, scorer) = load_mask(path, vocab).map_err(CliError::wrap(format!("reading {}", path.display())))?;
        let mut order: Vec<usize> = (0..scorer.mask.len()).collect();
        let w = scorer.mask.weights();
        order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
        println!(
            "mask ({} scoring, lambda {}), sparsity {:.4}; largest weights:",
            header.mode,
            header.lambda,
            scorer.mask.sparsity()
        );
        let top: Vec<_> = order
            .iter()
            .take(args.top)
            .map(|&j| json!({"type": vocab.name(j), "weight": w[j]}))
            .collect();
        for t in &top {
            println!("  {}\t{:.6}", t["type"].as_str().unwrap_or("?"), t["weight"].as_f64().unwrap());
        }
        results["mask"] = json!({"sparsity": scorer.mask.sparsity(), "largest_weights": top});
    }
    write_report(args.report.as_deref(), "inspect", &args, &hash, results)
}
