//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! The sparsity band for criterion 4 can be overridden with
//! `TYPEVEC_SPARSITY_BAND=lo,hi`.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typevec::corpus::{build_type_vocabulary, split_dataset, GoldTypeVector, TypeVocabulary, TypingExample};
use typevec::reduce::{prune_top_fraction, project_pairs, train_mask, write_mask, BinaryPair, MaskTrainConfig};
use typevec::rules::{apply_rules, parse_rules, RuleSet};
use typevec::sim::{cosine, dot, masked_cosine, masked_dot, DiagonalMask, ScoreMode};
use typevec::tasks::{
    cap_evaluate, cap_evaluate_instances, ned_evaluate, ned_evaluate_instances, CandidateEntity, CapExample,
    CapInstance, NedExample, NedInstance, NedOptions,
};
use typevec::tokenize::tokenize;
use typevec::typer::{
    batch_loss, loss_gradients, train, train_with_observer, write_checkpoint, Embedder, HiddenVector, ModelConfig,
    TrainConfig, TrainingExample, TypeVector, TyperModel,
};
use typevec::{Result, VocabId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient check", gradient_check),
        ("synthetic typing convergence", typing_convergence),
        ("kernel oracle equivalence", kernel_oracles),
        ("type-reduction shape", reduction_shape),
        ("rule-engine exactness", rule_exactness),
        ("debug-delta shape", debug_delta),
        ("harness oracle equivalence", harness_oracles),
        ("determinism", determinism),
        ("low-rank logits", low_rank),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {} ({:.2}s) {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn vocab(n: usize) -> TypeVocabulary {
    let width = n.to_string().len();
    TypeVocabulary::from_entries((0..n).map(|i| (format!("type{i:0width$}"), 1)).collect()).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

// 1 ------------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let n_types = 20;
    let v = vocab(n_types);
    let config = ModelConfig {
        dim: 8,
        buckets: 97,
        seed: 11,
    };
    let mut model = TyperModel::with_init_scale(v, config, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch: Vec<TrainingExample> = (0..3)
        .map(|i| {
            let mention = tokenize(&format!("entity{i} name{}", i * 7));
            let context = tokenize(&format!("w{} w{} the w{} of w{}", i, i + 3, i * 5, i + 11));
            let positives: Vec<usize> = (0..n_types).filter(|_| rng.random_bool(0.3)).collect();
            TrainingExample {
                input: model.featurize(&mention, &context).unwrap(),
                gold: GoldTypeVector::from_positions(n_types, positives).unwrap(),
            }
        })
        .collect();
    let (_, grads) = loss_gradients(&model, &batch).unwrap();

    #[derive(Clone, Copy)]
    enum Block {
        Embedding(usize, usize),
        Projection(usize),
        Bias(usize),
        TypeMatrix(usize),
    }
    let d = model.dim();
    let rows: Vec<usize> = grads.embeddings.keys().copied().collect();
    let probes = 200;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for p in 0..probes {
        let block = match p % 4 {
            0 => Block::Embedding(rows[rng.random_range(0..rows.len())], rng.random_range(0..d)),
            1 => Block::Projection(rng.random_range(0..2 * d * d)),
            2 => Block::Bias(rng.random_range(0..d)),
            _ => Block::TypeMatrix(rng.random_range(0..n_types * d)),
        };
        let analytic = match block {
            Block::Embedding(r, k) => grads.embeddings[&r][k],
            Block::Projection(i) => grads.projection[i],
            Block::Bias(i) => grads.bias[i],
            Block::TypeMatrix(i) => grads.type_matrix[i],
        };
        fn slot(m: &mut TyperModel, block: Block, d: usize) -> &mut f64 {
            match block {
                Block::Embedding(r, k) => &mut m.embeddings_mut()[r * d + k],
                Block::Projection(i) => &mut m.projection_mut()[i],
                Block::Bias(i) => &mut m.bias_mut()[i],
                Block::TypeMatrix(i) => &mut m.type_matrix_mut()[i],
            }
        }
        let original = *slot(&mut model, block, d);
        *slot(&mut model, block, d) = original + h;
        let up = batch_loss(&model, &batch).unwrap();
        *slot(&mut model, block, d) = original - h;
        let down = batch_loss(&model, &batch).unwrap();
        *slot(&mut model, block, d) = original;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-4 && elapsed < Duration::from_secs(10),
        format!("{probes} probes, max relative error {worst:.3e} (limit 1e-4)"),
    )
}

// 2 ------------------------------------------------------------------------

fn synthetic_typing(n: usize, n_types: usize, seed: u64) -> Vec<TypingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mut gold: Vec<usize> = (0..n_types).collect();
            gold.partial_shuffle(&mut rng, k);
            gold.truncate(k);
            let mut context: Vec<String> = (0..8).map(|_| format!("filler{}", rng.random_range(0..300))).collect();
            for &g in &gold {
                let at = rng.random_range(0..=context.len());
                context.insert(at, format!("trigger{g}"));
            }
            let mention = format!("name{}", rng.random_range(0..500));
            let names: Vec<String> = gold.iter().map(|g| format!("kind{g}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            TypingExample::new(&mention, &context.join(" "), &refs).unwrap()
        })
        .collect()
}

fn typing_convergence() -> Outcome {
    let start = Instant::now();
    let examples = synthetic_typing(2000, 50, 2);
    let (train_set, dev_set) = split_dataset(&examples, 0.1, 3).unwrap();
    let v = build_type_vocabulary(&train_set, 50).unwrap();
    let model = TyperModel::new(
        v,
        ModelConfig {
            dim: 64,
            buckets: 4096,
            seed: 1,
        },
    )
    .unwrap();
    let config = TrainConfig {
        epochs: 20,
        seed: 4,
        ..TrainConfig::default()
    };
    let mut best = (0, 0.0);
    let result = train_with_observer(model, &train_set, &dev_set, &config, |stats| {
        let f1 = stats.dev.map_or(0.0, |s| s.f1);
        if f1 > best.1 {
            best = (stats.epoch, f1);
        }
    });
    let elapsed = start.elapsed();
    match result {
        Ok(_) => outcome(
            best.1 >= 0.95 && elapsed < Duration::from_secs(120),
            format!("best dev macro F1 {:.4} at epoch {} (target 0.95 within 20)", best.1, best.0),
        ),
        Err(e) => outcome(false, format!("training failed: {e}")),
    }
}

// 3 ------------------------------------------------------------------------

fn oracle_dot(a: &[f64], b: &[f64], w: Option<&[f64]>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        s += wi * a[i] * b[i];
    }
    s
}

fn oracle_cosine(a: &[f64], b: &[f64], w: Option<&[f64]>) -> Option<f64> {
    let na = oracle_dot(a, a, w).sqrt();
    let nb = oracle_dot(b, b, w).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(oracle_dot(a, b, w) / na / nb)
}

fn kernel_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut worst_ones: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=300);
        let v = vocab(n);
        let (a, b) = (random_probs(&mut rng, n), random_probs(&mut rng, n));
        let (ta, tb) = (
            TypeVector::new(a.clone(), v.id()).unwrap(),
            TypeVector::new(b.clone(), v.id()).unwrap(),
        );
        let wd: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let wc = random_probs(&mut rng, n);
        let md = DiagonalMask::new(wd.clone(), ScoreMode::Dot).unwrap();
        let mc = DiagonalMask::new(wc.clone(), ScoreMode::Cosine).unwrap();
        let errs = [
            (dot(&ta, &tb).unwrap() - oracle_dot(&a, &b, None)).abs(),
            (cosine(&ta, &tb).unwrap() - oracle_cosine(&a, &b, None).unwrap()).abs(),
            (masked_dot(&ta, &tb, &md).unwrap() - oracle_dot(&a, &b, Some(&wd))).abs(),
            match (masked_cosine(&ta, &tb, &mc), oracle_cosine(&a, &b, Some(&wc))) {
                (Ok(x), Some(y)) => (x - y).abs(),
                (Err(_), None) => 0.0,
                _ => f64::INFINITY,
            },
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(*e));
        let ones_d = DiagonalMask::ones(n, ScoreMode::Dot);
        let ones_c = DiagonalMask::ones(n, ScoreMode::Cosine);
        worst_ones = worst_ones
            .max((masked_dot(&ta, &tb, &ones_d).unwrap() - dot(&ta, &tb).unwrap()).abs())
            .max((masked_cosine(&ta, &tb, &ones_c).unwrap() - cosine(&ta, &tb).unwrap()).abs());
    }
    outcome(
        worst <= 1e-12 && worst_ones <= 1e-9,
        format!("1000 pairs, max oracle deviation {worst:.2e}, all-ones mask deviation {worst_ones:.2e}"),
    )
}

// 4 ------------------------------------------------------------------------

/// CAP-style pair data over 2000 types: 200 strongly informative types, 1200
/// weakly informative ones and 600 that are pure noise. Type roles are assigned
/// to random positions.
struct ReductionData {
    vocab: TypeVocabulary,
    informative: Vec<usize>,
    train: Vec<BinaryPair>,
    test: Vec<BinaryPair>,
}

fn reduction_data(seed: u64) -> ReductionData {
    const N_TYPES: usize = 2000;
    const N_STRONG: usize = 200;
    const N_WEAK: usize = 1200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = vocab(N_TYPES);
    let mut roles: Vec<usize> = (0..N_TYPES).collect();
    roles.shuffle(&mut rng);
    let strong = roles[..N_STRONG].to_vec();
    let weak = roles[N_STRONG..N_STRONG + N_WEAK].to_vec();
    let noise = roles[N_STRONG + N_WEAK..].to_vec();
    let noise_rate: Vec<f64> = noise.iter().map(|_| rng.random_range(0.02..0.3)).collect();

    struct Entity {
        strong: Vec<usize>,
        weak: Vec<usize>,
    }
    let entities: Vec<Entity> = (0..200)
        .map(|_| Entity {
            strong: strong.choose_multiple(&mut rng, 4).copied().collect(),
            weak: weak.choose_multiple(&mut rng, 40).copied().collect(),
        })
        .collect();

    let view = |rng: &mut ChaCha8Rng, e: &Entity| -> TypeVector {
        let mut t: Vec<f64> = (0..N_TYPES).map(|_| rng.random_range(0.0..0.02)).collect();
        for &j in &e.strong {
            if rng.random_bool(0.9) {
                t[j] = rng.random_range(0.6..1.0);
            }
        }
        for &j in &e.weak {
            if rng.random_bool(0.2) {
                t[j] = rng.random_range(0.3..1.0);
            }
        }
        for (&j, &r) in noise.iter().zip(&noise_rate) {
            if rng.random_bool(r) {
                t[j] = rng.random_range(0.3..1.0);
            }
        }
        TypeVector::new(t, v.id()).unwrap()
    };
    let make = |rng: &mut ChaCha8Rng, n: usize| -> Vec<BinaryPair> {
        (0..n)
            .map(|i| {
                let a = rng.random_range(0..entities.len());
                let positive = i % 2 == 0;
                let b = if positive {
                    a
                } else {
                    (a + rng.random_range(1..entities.len())) % entities.len()
                };
                let left = view(rng, &entities[a]);
                let right = view(rng, &entities[b]);
                BinaryPair::new(left, right, positive).unwrap()
            })
            .collect()
    };
    let train = make(&mut rng, 6000);
    let test = make(&mut rng, 2000);
    ReductionData {
        vocab: v,
        informative: strong,
        train,
        test,
    }
}

fn sparsity_band() -> (f64, f64) {
    std::env::var("TYPEVEC_SPARSITY_BAND")
        .ok()
        .and_then(|s| {
            let (lo, hi) = s.split_once(',')?;
            Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
        })
        .unwrap_or((0.20, 0.35))
}

/// Tuned on this synthetic task. Sparsity is sensitive to λ here: 2.2e-3 gives
/// about 0.21 and 2.6e-3 already zeroes most weakly informative types.
const REDUCTION_CONFIG: MaskTrainConfig = MaskTrainConfig {
    lambda_l1: 2.4e-3,
    lr: 2.0,
    epochs: 200,
    seed: 0,
    scorer: ScoreMode::Dot,
    batch_size: None,
};

fn reduction_shape() -> Outcome {
    let start = Instant::now();
    let data = reduction_data(21);
    let trained = match train_mask(&data.train, &REDUCTION_CONFIG) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("train_mask failed: {e}")),
    };
    let full_acc = trained.scorer.accuracy(&data.test).unwrap();
    let reduced = prune_top_fraction(&trained.scorer.mask, 0.1, &data.vocab).unwrap();
    // The task scorer is refit on the reduced type set before evaluation.
    let pruned = train_mask(&project_pairs(&data.train, &reduced).unwrap(), &REDUCTION_CONFIG)
        .unwrap()
        .scorer;
    let pruned_acc = pruned.accuracy(&project_pairs(&data.test, &reduced).unwrap()).unwrap();
    let kept_informative = reduced
        .kept_indices()
        .iter()
        .filter(|i| data.informative.contains(i))
        .count();
    let drop = 100.0 * (full_acc - pruned_acc);
    let (lo, hi) = sparsity_band();
    let elapsed = start.elapsed();
    outcome(
        drop <= 2.0 && (lo..=hi).contains(&trained.sparsity) && elapsed < Duration::from_secs(300),
        format!(
            "held-out accuracy {:.2} -> {:.2} after keeping {} of {} types (drop {drop:.2} points, limit 2.0); \
             {kept_informative} of {} informative types kept; sparsity {:.3} in band [{lo}, {hi}]",
            100.0 * full_acc,
            100.0 * pruned_acc,
            reduced.len(),
            data.vocab.len(),
            data.informative.len(),
            trained.sparsity,
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn fixture_rules() -> RuleSet {
    parse_rules(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/conll_debug_rules.jsonl")).unwrap()
}

/// Every type the fixture rules mention, plus unrelated filler types.
fn rule_vocab(rules: &RuleSet) -> TypeVocabulary {
    let mut names: Vec<String> = rules
        .rules
        .iter()
        .flat_map(|r| r.set_one.iter().chain(&r.set_zero).cloned())
        .collect();
    names.extend((0..40).map(|i| format!("filler type {i:02}")));
    names.sort();
    names.dedup();
    TypeVocabulary::from_entries(names.into_iter().map(|n| (n, 1)).collect()).unwrap()
}

fn rule_exactness() -> Outcome {
    let rules = fixture_rules();
    if rules.len() != 11 {
        return outcome(false, format!("fixture has {} rules, expected 11", rules.len()));
    }
    let v = rule_vocab(&rules);
    let resolved = rules.resolve(&v);
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Row 1 on a vector whose context triggers only that rule.
    let mut base = random_probs(&mut rng, v.len());
    base[v.position("women's").unwrap()] = 0.3;
    base[v.position("davis cup teams").unwrap()] = 0.8;
    let t = TypeVector::new(base.clone(), v.id()).unwrap();
    let mention = tokenize("Spain");
    let context = tokenize("Spain beat Austria in the Fed Cup quarterfinal");
    let matched = resolved.matching(&mention, &context);
    let out = apply_rules(&t, &resolved, &mention, &context).unwrap();
    let ones = ["women's", "tennis", "teams", "sports"];
    let zeros = ["davis cup teams", "davis cup"];
    let mut exact = matched == vec![0];
    for (j, (&before, &after)) in base.iter().zip(out.values()).enumerate() {
        let name = v.name(j).unwrap();
        let expected = if ones.contains(&name) {
            1.0
        } else if zeros.contains(&name) {
            0.0
        } else {
            before
        };
        exact &= after.to_bits() == expected.to_bits();
    }

    // Idempotence on random vectors and random mention/context combinations.
    let mentions = ["washington", "wall street", "worldcup", "chicago", "lebed", "jordan", "jansher", "spain"];
    let phrases = [
        "fed cup", "soccer", "cricket", "tennis", "1996", "baseball", "new york", "yeltsin", "venice festival",
        "squash", "federal", "the match",
    ];
    let mut idempotent = 0;
    let mut fired = 0;
    for _ in 0..1000 {
        let t = TypeVector::new(random_probs(&mut rng, v.len()), v.id()).unwrap();
        let mention = tokenize(mentions[rng.random_range(0..mentions.len())]);
        let words: Vec<&str> = (0..4).map(|_| phrases[rng.random_range(0..phrases.len())]).collect();
        let context = tokenize(&words.join(" "));
        let once = apply_rules(&t, &resolved, &mention, &context).unwrap();
        let twice = apply_rules(&once, &resolved, &mention, &context).unwrap();
        if !resolved.matching(&mention, &context).is_empty() {
            fired += 1;
        }
        let same = once.values().iter().zip(twice.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        idempotent += usize::from(same);
    }
    outcome(
        exact && idempotent == 1000,
        format!(
            "11 rules parsed; row 1 exact: {exact}; idempotent on {idempotent}/1000 vectors ({fired} with a matching rule)"
        ),
    )
}

// 6 ------------------------------------------------------------------------

/// Looks vectors up by the joined mention and context tokens.
struct LookupEmbedder {
    vocab: VocabId,
    table: HashMap<String, TypeVector>,
}

impl LookupEmbedder {
    fn key(mention: &[String], context: &[String]) -> String {
        format!("{}|{}", mention.join(" "), context.join(" "))
    }

    fn insert(&mut self, mention: &[String], context: &[String], t: TypeVector) {
        self.table.insert(Self::key(mention, context), t);
    }
}

impl Embedder for LookupEmbedder {
    fn embed(&self, mention: &[String], context: &[String]) -> Result<TypeVector> {
        self.table
            .get(&Self::key(mention, context))
            .cloned()
            .ok_or_else(|| typevec::Error::InvalidArgument(format!("no vector for {}", Self::key(mention, context))))
    }

    fn vocab_id(&self) -> VocabId {
        self.vocab
    }
}

fn named_vector(v: &TypeVocabulary, background: f64, values: &[(&str, f64)]) -> TypeVector {
    let mut t = vec![background; v.len()];
    for (name, x) in values {
        t[v.position(name).unwrap()] = *x;
    }
    TypeVector::new(t, v.id()).unwrap()
}

fn debug_delta() -> Outcome {
    let rules = fixture_rules();
    let v = rule_vocab(&rules);
    let resolved = rules.resolve(&v);
    let mut contexts = LookupEmbedder {
        vocab: v.id(),
        table: HashMap::new(),
    };
    let mut descriptions = LookupEmbedder {
        vocab: v.id(),
        table: HashMap::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 10;
    let mut examples = Vec::new();

    let women = named_vector(&v, 0.01, &[("women's", 1.0), ("tennis", 1.0), ("teams", 1.0), ("sports", 1.0)]);
    let men = named_vector(
        &v,
        0.01,
        &[("davis cup teams", 1.0), ("davis cup", 1.0), ("tennis", 1.0), ("teams", 0.9), ("sports", 0.9)],
    );
    for i in 0..n {
        let mention = tokenize("Spain");
        let (context, mention_vec, gold) = if i == 0 {
            // The planted error: the vector leans to the men's team, the rule fixes it.
            (
                tokenize("Spain reached the Fed Cup final in Zurich"),
                named_vector(
                    &v,
                    0.01,
                    &[("women's", 0.3), ("davis cup teams", 0.8), ("davis cup", 0.6), ("tennis", 0.9), ("teams", 0.7)],
                ),
                0,
            )
        } else {
            let gold = rng.random_range(0..2);
            let lean = if gold == 0 { "women's" } else { "davis cup teams" };
            (
                tokenize(&format!("match report number {i}")),
                named_vector(&v, 0.01, &[(lean, 0.9), ("tennis", 0.8)]),
                gold,
            )
        };
        contexts.insert(&mention, &context, mention_vec);
        let (first, second) = if gold == 0 { (&women, &men) } else { (&men, &women) };
        let candidates: Vec<CandidateEntity> = [(format!("a{i}"), first), (format!("b{i}"), second)]
            .into_iter()
            .map(|(id, t)| {
                let title = tokenize(&format!("entity {id}"));
                descriptions.insert(&title, &[], t.clone());
                CandidateEntity {
                    id,
                    description_mention: title,
                    description: Vec::new(),
                    prior: 0.5,
                }
            })
            .collect();
        examples.push(NedExample {
            mention,
            context,
            title: None,
            first_sentence: None,
            candidates,
            gold_index: 0,
            context_prepended: false,
        });
    }

    let base = ned_evaluate(&contexts, &descriptions, &examples, &NedOptions::default()).unwrap();
    let with_rules = ned_evaluate(
        &contexts,
        &descriptions,
        &examples,
        &NedOptions {
            rules: Some(&resolved),
            ..Default::default()
        },
    )
    .unwrap();
    let empty = RuleSet::default().resolve(&v);
    let with_empty = ned_evaluate(
        &contexts,
        &descriptions,
        &examples,
        &NedOptions {
            rules: Some(&empty),
            ..Default::default()
        },
    )
    .unwrap();
    let delta = with_rules.accuracy - base.accuracy;
    let planted_wrong = base.predictions[0] == Some(1);
    let one_fixed = with_rules.correct == base.correct + 1 && (delta - 1.0 / n as f64).abs() < 1e-12;
    let identical = with_empty == base && with_empty.accuracy.to_bits() == base.accuracy.to_bits();
    outcome(
        planted_wrong && one_fixed && identical && base.errors == 0,
        format!(
            "accuracy {:.2} -> {:.2} on {n} examples (delta {delta:.4}, expected 1/{n}); empty rule set bit-identical: {identical}",
            base.accuracy, with_rules.accuracy
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn sparse_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if rng.random_bool(0.03) {
        return vec![0.0; n];
    }
    // Coarse values make exact cosine ties between distinct vectors common.
    (0..n)
        .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(1..=4) as f64 / 4.0 })
        .collect()
}

/// Same formula as the library kernel, written as a plain loop so that ties are
/// reproduced bit for bit.
fn oracle_cos(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        ab += a[i] * b[i];
    }
    for i in 0..a.len() {
        aa += a[i] * a[i];
    }
    for i in 0..b.len() {
        bb += b[i] * b[i];
    }
    if aa > 0.0 && bb > 0.0 {
        Some(ab / (aa * bb).sqrt())
    } else {
        None
    }
}

fn oracle_ned(mention: &[f64], candidates: &[Vec<f64>]) -> Option<usize> {
    let scores: Vec<Option<f64>> = candidates.iter().map(|c| oracle_cos(mention, c)).collect();
    let best = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| *s == Some(best))
}

fn harness_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n_types = 6;
    let v = vocab(n_types);
    let threshold = 0.5;

    let mut cap = Vec::new();
    let mut cap_examples = Vec::new();
    let mut cap_lookup = LookupEmbedder {
        vocab: v.id(),
        table: HashMap::new(),
    };
    let (mut correct, mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0, 0);
    let mut boundary = 0;
    for i in 0..1000 {
        let a = sparse_probs(&mut rng, n_types);
        let b = if rng.random_bool(0.1) { a.clone() } else { sparse_probs(&mut rng, n_types) };
        let label = rng.random_bool(0.5);
        if let Some(c) = oracle_cos(&a, &b) {
            boundary += usize::from(c == threshold);
            let pred = c > threshold;
            correct += usize::from(pred == label);
            match (pred, label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let (ta, tb) = (TypeVector::new(a, v.id()).unwrap(), TypeVector::new(b, v.id()).unwrap());
        let (m1, m2) = (tokenize(&format!("left {i}")), tokenize(&format!("right {i}")));
        cap_lookup.insert(&m1, &[], ta.clone());
        cap_lookup.insert(&m2, &[], tb.clone());
        cap_examples.push(CapExample {
            mention1: m1,
            context1: Vec::new(),
            mention2: m2,
            context2: Vec::new(),
            coreferent: label,
        });
        cap.push(CapInstance {
            left: ta,
            right: tb,
            coreferent: label,
        });
    }
    let report = cap_evaluate_instances(&cap, threshold).unwrap();
    let via_embedder = cap_evaluate(&cap_lookup, &cap_examples, threshold).unwrap();
    let cap_ok = report.correct == correct
        && (report.true_positive, report.false_positive, report.true_negative, report.false_negative)
            == (tp, fp, tn, fn_)
        && report.accuracy == correct as f64 / 1000.0
        && via_embedder == report;

    let mut ned = Vec::new();
    let mut expected = Vec::new();
    let mut ties = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        let mention = sparse_probs(&mut rng, n_types);
        let mut cands: Vec<Vec<f64>> = Vec::new();
        for c in 0..k {
            if c > 0 && rng.random_bool(0.25) {
                let dup = cands[rng.random_range(0..c)].clone();
                cands.push(dup);
            } else {
                cands.push(sparse_probs(&mut rng, n_types));
            }
        }
        let scores: Vec<f64> = cands.iter().filter_map(|c| oracle_cos(&mention, c)).collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ties += usize::from(scores.iter().filter(|s| **s == best).count() > 1);
        expected.push(oracle_ned(&mention, &cands));
        let gold = rng.random_range(0..k);
        ned.push(NedInstance {
            mention: tokenize("m"),
            context: Vec::new(),
            mention_vec: TypeVector::new(mention, v.id()).unwrap(),
            candidate_vecs: cands.into_iter().map(|c| TypeVector::new(c, v.id()).unwrap()).collect(),
            gold_index: gold,
        });
    }
    let report = ned_evaluate_instances(&ned, &NedOptions::default()).unwrap();
    let oracle_correct = expected
        .iter()
        .zip(&ned)
        .filter(|(p, inst)| **p == Some(inst.gold_index))
        .count();
    let ned_ok = report.predictions == expected && report.correct == oracle_correct;
    outcome(
        cap_ok && ned_ok,
        format!(
            "CAP {correct}/1000 correct ({boundary} at the threshold), NED {oracle_correct}/1000 correct \
             ({ties} instances with tied best scores); cap match {cap_ok}, ned match {ned_ok}"
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let examples = synthetic_typing(300, 20, 9);
    let run_train = || {
        let (tr, dev) = split_dataset(&examples, 0.2, 1).unwrap();
        let v = build_type_vocabulary(&tr, 20).unwrap();
        let model = TyperModel::new(
            v,
            ModelConfig {
                dim: 16,
                buckets: 1024,
                seed: 7,
            },
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 3,
            seed: 7,
            ..TrainConfig::default()
        };
        let (model, report) = train(model, &tr, &dev, &config).unwrap();
        (write_checkpoint(&model), serde_json::to_vec(&report).unwrap())
    };
    let train_same = run_train() == run_train();

    let data = reduction_data(5);
    let config = MaskTrainConfig {
        epochs: 5,
        batch_size: Some(64),
        seed: 3,
        ..REDUCTION_CONFIG
    };
    let run_mask = || {
        let out = train_mask(&data.train[..400], &config).unwrap();
        let mut buf = Vec::new();
        write_mask(&mut buf, &out.scorer, &config, &data.vocab).unwrap();
        buf
    };
    let mask_same = run_mask() == run_mask();

    let ids: Vec<usize> = (0..1000).collect();
    let run_split = || serde_json::to_vec(&split_dataset(&ids, 0.1, 42).unwrap()).unwrap();
    let split_same = run_split() == run_split();
    outcome(
        train_same && mask_same && split_same,
        format!("checkpoint identical: {train_same}; mask identical: {mask_same}; split identical: {split_same}"),
    )
}

// 9 ------------------------------------------------------------------------

fn low_rank() -> Outcome {
    let n_types = 100;
    let model = TyperModel::with_init_scale(
        vocab(n_types),
        ModelConfig {
            dim: 16,
            buckets: 5000,
            seed: 2,
        },
        1.0,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut data = Vec::with_capacity(200 * n_types);
    for _ in 0..200 {
        let mention = vec![format!("m{}", rng.random_range(0..10_000))];
        let context: Vec<String> = (0..6).map(|_| format!("c{}", rng.random_range(0..10_000))).collect();
        let h: HiddenVector = model.encode(&model.featurize(&mention, &context).unwrap());
        data.extend(model.logits(&h).unwrap());
    }
    let sv = DMatrix::from_row_slice(200, n_types, &data).singular_values();
    let max = sv.max();
    let rank = sv.iter().filter(|s| **s > 1e-8 * max).count();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    outcome(
        rank <= 16,
        format!(
            "200 x {n_types} logit matrix has numerical rank {rank} (limit 16); sigma_16/sigma_1 {:.2e}, sigma_17/sigma_1 {:.2e}",
            sorted[15] / max,
            sorted[16] / max
        ),
    )
}
