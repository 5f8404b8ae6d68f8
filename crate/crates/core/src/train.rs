//! Loss assembly, the training loop, and evaluation.
//!
//! # Losses
//!
//! Every example contributes two terms.  The **action likelihood** term is
//! the mean negative log-likelihood of the oracle actions under teacher
//! forcing — mean, so its scale is comparable across queries of different
//! sizes.  The **alignment** term supervises attention: at every
//! `ApplyRule` step the squared difference between the attention
//! distribution and the owning clause's alignment prior is summed over
//! question tokens.  Selection steps (columns, tables, values) carry no
//! alignment term at all — their supervision is the copy target itself —
//! so the alignment loss contributes exactly zero gradient through the
//! selection heads.  Per example the alignment term is the sum over
//! `ApplyRule` steps (optionally the mean, see
//! [`TrainConfig::align_mean`]), scaled by [`TrainConfig::align_weight`].
//!
//! When attention already equals the prior the term is exactly zero, and a
//! one-step discrepancy `[1, 0]` against `[0.5, 0.5]` scores `0.5` — the
//! identities pinned by the tests below.
//!
//! # Loop
//!
//! Plain shuffled minibatch gradient descent with Adam: per epoch the
//! example order is reshuffled (seed-deterministic), per minibatch the
//! example gradients are averaged, clipped by global norm, and applied.
//! Everything downstream of the seed is bitwise deterministic.  Training
//! aborts if a loss or gradient goes non-finite, and can stop early once
//! greedy-decode exact match on the training set reaches a target.
//!
//! # Ablations
//!
//! The 2×2 grid of decoding mode × alignment supervision gives the four
//! standard configurations, see [`ablation_grid`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{self, Corpus, Example};
use crate::decoder::{self, DecodeError, Mode};
use crate::grammar::Grammar;
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::model::Model;
use crate::nn::params::{ParamGrads, ParameterStore};
use crate::nn::tape::{NodeRef, Tape};
use crate::rng::DetRng;
use crate::sql::SqlGrammar;

/// Training hyperparameters and loss configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Recurrent wiring used for both teacher forcing and greedy decoding.
    pub mode: Mode,
    /// Include the alignment term.
    pub use_align: bool,
    /// Weight of the alignment term in the total loss.
    pub align_weight: f64,
    /// Normalize the alignment term by the number of `ApplyRule` steps
    /// instead of leaving it a plain sum.
    pub align_mean: bool,
    pub lr: f64,
    /// Global-norm gradient clip.
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once training-set exact match reaches this fraction.
    pub stop_at_em: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Parallel,
            use_align: true,
            align_weight: 1.0,
            align_mean: false,
            lr: 1e-3,
            clip: 5.0,
            epochs: 200,
            batch_size: 8,
            seed: 0,
            stop_at_em: Some(1.0),
        }
    }
}

/// The four ablation configurations: full system, no alignment term, no
/// parallel decoding, and neither.
pub fn ablation_grid() -> [(&'static str, Mode, bool); 4] {
    [
        ("ours", Mode::Parallel, true),
        ("no-align", Mode::Parallel, false),
        ("no-parallel", Mode::Sequential, true),
        ("baseline", Mode::Sequential, false),
    ]
}

/// Training failure.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    EmptyCorpus,
    /// A loss or gradient stopped being finite.
    NonFinite { epoch: usize },
    Decode(DecodeError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyCorpus => write!(f, "cannot train on an empty corpus"),
            TrainError::NonFinite { epoch } => {
                write!(f, "loss or gradient went non-finite in epoch {epoch}")
            }
            TrainError::Decode(e) => write!(f, "teacher forcing failed: {e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<DecodeError> for TrainError {
    fn from(e: DecodeError) -> Self {
        TrainError::Decode(e)
    }
}

/// One example's loss, still on the tape, with its plain-number breakdown.
pub struct ExampleLoss {
    /// Scalar node to backpropagate.
    pub total: NodeRef,
    /// Mean oracle-action negative log-likelihood (value).
    pub action_nll: f64,
    /// Alignment term before weighting (value; zero when disabled).
    pub align: f64,
    pub steps: usize,
    pub apply_steps: usize,
}

/// Builds one example's loss on the tape.
pub fn example_loss(
    tape: &mut Tape<'_>,
    model: &Model,
    g: &Grammar,
    ex: &Example,
    schema: &crate::schema::Schema,
    cfg: &TrainConfig,
) -> Result<ExampleLoss, TrainError> {
    let enc = crate::encoder::encode(tape, model, &ex.question, schema);
    let steps =
        decoder::teacher_force(tape, model, g, &enc, &ex.ast, &ex.trace, cfg.mode)?;
    debug_assert_eq!(steps.len(), ex.trace.actions.len());

    let nlls: Vec<NodeRef> = steps.iter().map(|s| s.nll).collect();
    let nll_sum = tape.sum_scalars(&nlls);
    let action_nll = tape.scale(nll_sum, 1.0 / steps.len() as f64);

    let mut align_terms: Vec<NodeRef> = Vec::new();
    if cfg.use_align {
        for s in &steps {
            if matches!(s.action, crate::ast::Action::ApplyRule(_)) {
                let prior = ex.priors[s.clause.index()].clone();
                align_terms.push(tape.sq_diff_const(s.p_att, prior));
            }
        }
    }
    let apply_steps = steps.iter().filter(|s| {
        matches!(s.action, crate::ast::Action::ApplyRule(_))
    }).count();

    let (total, align_value) = if align_terms.is_empty() {
        (action_nll, 0.0)
    } else {
        let mut align = tape.sum_scalars(&align_terms);
        if cfg.align_mean {
            align = tape.scale(align, 1.0 / align_terms.len() as f64);
        }
        let align_value = tape.scalar(align);
        let weighted = tape.scale(align, cfg.align_weight);
        (tape.add(action_nll, weighted), align_value)
    };

    Ok(ExampleLoss {
        total,
        action_nll: tape.scalar(action_nll),
        align: align_value,
        steps: steps.len(),
        apply_steps,
    })
}

/// Per-epoch averages and the training-set exact match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over examples of the per-example mean action NLL.
    pub action_nll: f64,
    /// Mean over examples of the unweighted alignment term.
    pub align_loss: f64,
    /// Mean over examples of the total loss.
    pub total: f64,
    /// Greedy-decode exact match on the training set.
    pub train_em: f64,
}

impl fmt::Display for EpochMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {}, action_nll {:.6}, align_loss {:.6}, total {:.6}, train_em {:.4}",
            self.epoch, self.action_nll, self.align_loss, self.total, self.train_em
        )
    }
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    /// True when the exact-match target stopped training before the last
    /// configured epoch.
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn epochs_run(&self) -> usize {
        self.metrics.len()
    }

    pub fn final_em(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.train_em)
    }
}

/// Trains `model` on the corpus in place.
pub fn train(
    g: &Grammar,
    sg: &SqlGrammar,
    model: &Model,
    store: &mut ParameterStore,
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let n = corpus.len();
    let batch = cfg.batch_size.max(1);
    let mut rng = DetRng::new(cfg.seed);
    let mut adam = Adam::new(
        store,
        AdamConfig { lr: cfg.lr, clip: cfg.clip, ..AdamConfig::default() },
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut metrics = Vec::new();

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut nll_sum = 0.0;
        let mut align_sum = 0.0;
        let mut total_sum = 0.0;

        for chunk in order.chunks(batch) {
            let mut grads = ParamGrads::zeros(store);
            for &i in chunk {
                let ex = &corpus.examples[i];
                let schema = corpus.schema_of(ex);
                let mut tape = Tape::new(store);
                let loss = example_loss(&mut tape, model, g, ex, schema, cfg)?;
                let value = tape.scalar(loss.total);
                if !value.is_finite() {
                    return Err(TrainError::NonFinite { epoch });
                }
                nll_sum += loss.action_nll;
                align_sum += loss.align;
                total_sum += value;
                grads.accumulate(&tape.backward(loss.total));
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !grads.all_finite() {
                return Err(TrainError::NonFinite { epoch });
            }
            adam.step(store, &mut grads);
        }

        let train_em = evaluate(g, sg, model, store, corpus, cfg.mode).em();
        let m = EpochMetrics {
            epoch,
            action_nll: nll_sum / n as f64,
            align_loss: align_sum / n as f64,
            total: total_sum / n as f64,
            train_em,
        };
        metrics.push(m);
        if cfg.stop_at_em.is_some_and(|target| train_em >= target) {
            return Ok(TrainOutcome { metrics, stopped_early: true });
        }
    }
    Ok(TrainOutcome { metrics, stopped_early: false })
}

/// Greedy-decode evaluation against gold keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub total: usize,
    pub matched: usize,
    /// Examples whose decode failed outright (budget, no candidates, …).
    pub failures: usize,
    /// Per hardness bucket, easiest first: (matched, total).
    pub per_hardness: [(usize, usize); 4],
}

impl EvalReport {
    pub fn em(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }

    /// One line per hardness bucket plus the overall exact match.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (h, (matched, total)) in
            corpus::Hardness::ALL.into_iter().zip(self.per_hardness)
        {
            let em = if total == 0 { 0.0 } else { matched as f64 / total as f64 };
            out.push(format!("{}: {}/{} ({:.4})", h.name(), matched, total, em));
        }
        out.push(format!("overall: {}/{} ({:.4})", self.matched, self.total, self.em()));
        out
    }
}

/// Decodes every example greedily and scores exact match; decode failures
/// count as mismatches.
pub fn evaluate(
    g: &Grammar,
    sg: &SqlGrammar,
    model: &Model,
    store: &ParameterStore,
    corpus: &Corpus,
    mode: Mode,
) -> EvalReport {
    let mut report = EvalReport {
        total: corpus.len(),
        matched: 0,
        failures: 0,
        per_hardness: [(0, 0); 4],
    };
    for ex in &corpus.examples {
        let schema = corpus.schema_of(ex);
        report.per_hardness[ex.hardness.index()].1 += 1;
        match decoder::decode_query(g, model, store, schema, &ex.question, mode) {
            Ok(out) => {
                if let Ok(spec) = crate::sql::ast_to_spec(&out.ast, sg, g) {
                    if corpus::exact_match(&spec, ex, schema) {
                        report.matched += 1;
                        report.per_hardness[ex.hardness.index()].0 += 1;
                    }
                }
            }
            Err(_) => report.failures += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_schemas, Corpus, RawExample};
    use crate::grammar;
    use crate::nn::model::{Dims, Vocab};
    use alloc::borrow::ToOwned;
    use alloc::vec;

    const SCHEMA_TEXT: &str = "\
table\tcars_db\tcars
col\tcars_db\tcars\tmodel\ttext
col\tcars_db\tcars\tyear\tnum
col\tcars_db\tcars\tmax_speed\tnum
";

    fn tiny_corpus(g: &Grammar, sg: &SqlGrammar, raws: &[RawExample]) -> Corpus {
        let schemas = parse_schemas(SCHEMA_TEXT).unwrap();
        Corpus::prepare(g, sg, schemas, raws).unwrap()
    }

    fn raw(question: &str, sql: &str) -> RawExample {
        RawExample {
            db_id: "cars_db".to_owned(),
            question: question.to_owned(),
            sql: sql.to_owned(),
        }
    }

    fn model_for(corpus: &Corpus, seed: u64) -> (Model, ParameterStore) {
        let g = grammar::load_default();
        let vocab = Vocab::build(corpus.vocab_words().iter());
        Model::new(&g, vocab, Dims::default(), seed)
    }

    #[test]
    fn one_step_discrepancy_scores_one_half() {
        let store = ParameterStore::new();
        let mut tape = Tape::new(&store);
        let p = tape.input(vec![1.0, 0.0]);
        let term = tape.sq_diff_const(p, vec![0.5, 0.5]);
        assert!((tape.scalar(term) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matching_attention_gives_exactly_zero_alignment_loss() {
        // Zero weights make attention exactly uniform; a question with no
        // schema mentions falls back to whole-question (uniform) priors, so
        // the alignment term vanishes identically, not just approximately.
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let corpus = tiny_corpus(
            &g,
            &sg,
            &[raw("everything we own please", "select * from cars as T1")],
        );
        let ex = &corpus.examples[0];
        assert!(ex.align.is_fallback());
        let (model, mut store) = model_for(&corpus, 5);
        for i in 0..store.len() {
            for v in store.tensor_mut(crate::nn::params::ParamId(i)).data.iter_mut() {
                *v = 0.0;
            }
        }
        let cfg = TrainConfig::default();
        let mut tape = Tape::new(&store);
        let loss =
            example_loss(&mut tape, &model, &g, ex, corpus.schema_of(ex), &cfg).unwrap();
        assert_eq!(loss.align.to_bits(), 0.0f64.to_bits());
        assert!(loss.apply_steps > 0);
        // And the total then equals the pure action term.
        assert_eq!(tape.scalar(loss.total), loss.action_nll);
    }

    #[test]
    fn alignment_loss_sends_no_gradient_into_selection_heads() {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let corpus = tiny_corpus(
            &g,
            &sg,
            &[raw(
                "which model is newer than 1980",
                "select T1.model from cars as T1 where T1.year > 1980",
            )],
        );
        let ex = &corpus.examples[0];
        let (model, store) = model_for(&corpus, 6);
        let cfg = TrainConfig::default();
        let mut tape = Tape::new(&store);
        let enc = crate::encoder::encode(&mut tape, &model, &ex.question, corpus.schema_of(ex));
        let steps =
            decoder::teacher_force(&mut tape, &model, &g, &enc, &ex.ast, &ex.trace, cfg.mode)
                .unwrap();
        let terms: Vec<NodeRef> = steps
            .iter()
            .filter(|s| matches!(s.action, crate::ast::Action::ApplyRule(_)))
            .map(|s| {
                let prior = ex.priors[s.clause.index()].clone();
                tape.sq_diff_const(s.p_att, prior)
            })
            .collect();
        let align_only = tape.sum_scalars(&terms);
        let grads = tape.backward(align_only);
        // Scoring heads never feed attention, so they get exactly zero.
        for id in
            [model.p.head_rule_w, model.p.head_rule_b, model.p.head_col, model.p.head_tab,
             model.p.head_val]
        {
            assert!(grads.slot(id).iter().all(|&v| v == 0.0));
        }
        // The attention projection does learn from it.
        assert!(grads.slot(model.p.dec_attn).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn loss_breakdown_adds_up_under_both_align_settings() {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let corpus = tiny_corpus(
            &g,
            &sg,
            &[raw(
                "which model is newer than 1980",
                "select T1.model from cars as T1 where T1.year > 1980",
            )],
        );
        let ex = &corpus.examples[0];
        let (model, store) = model_for(&corpus, 8);
        for align_mean in [false, true] {
            let cfg = TrainConfig { align_mean, align_weight: 0.7, ..TrainConfig::default() };
            let mut tape = Tape::new(&store);
            let loss =
                example_loss(&mut tape, &model, &g, ex, corpus.schema_of(ex), &cfg).unwrap();
            let total = tape.scalar(loss.total);
            assert!((total - (loss.action_nll + 0.7 * loss.align)).abs() < 1e-12);
            assert!(loss.align > 0.0);
        }
        // Alignment off: the term is absent, not merely zero-weighted.
        let cfg = TrainConfig { use_align: false, ..TrainConfig::default() };
        let mut tape = Tape::new(&store);
        let loss = example_loss(&mut tape, &model, &g, ex, corpus.schema_of(ex), &cfg).unwrap();
        assert_eq!(loss.align, 0.0);
        assert_eq!(tape.scalar(loss.total), loss.action_nll);
    }

    #[test]
    fn training_is_bitwise_deterministic_and_learns() {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let corpus = tiny_corpus(
            &g,
            &sg,
            &[
                raw("how many cars are there", "select count(*) from cars as T1"),
                raw(
                    "which model is newer than 1980",
                    "select T1.model from cars as T1 where T1.year > 1980",
                ),
            ],
        );
        let cfg = TrainConfig {
            epochs: 12,
            batch_size: 2,
            stop_at_em: None,
            ..TrainConfig::default()
        };

        let run = |seed_model: u64| {
            let (model, mut store) = model_for(&corpus, seed_model);
            let out = train(&g, &sg, &model, &mut store, &corpus, &cfg).unwrap();
            let bytes: Vec<u64> = (0..store.len())
                .flat_map(|i| {
                    store
                        .data(crate::nn::params::ParamId(i))
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>()
                })
                .collect();
            (out, bytes)
        };
        let (out_a, bytes_a) = run(42);
        let (out_b, bytes_b) = run(42);
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(out_a.metrics, out_b.metrics);
        assert_eq!(out_a.epochs_run(), 12);
        // The loss moves down over the run.
        let first = out_a.metrics.first().unwrap().total;
        let last = out_a.metrics.last().unwrap().total;
        assert!(last < first, "loss did not drop: {first} -> {last}");
    }

    #[test]
    fn overfits_a_tiny_corpus_to_full_exact_match() {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let corpus = tiny_corpus(
            &g,
            &sg,
            &[
                raw("how many cars are there", "select count(*) from cars as T1"),
                raw(
                    "which model is newer than 1980",
                    "select T1.model from cars as T1 where T1.year > 1980",
                ),
                raw("list every model", "select T1.model from cars as T1"),
            ],
        );
        let (model, mut store) = model_for(&corpus, 21);
        let cfg = TrainConfig { epochs: 150, batch_size: 3, ..TrainConfig::default() };
        let out = train(&g, &sg, &model, &mut store, &corpus, &cfg).unwrap();
        assert!(
            out.final_em() >= 1.0,
            "did not overfit: em {} after {} epochs",
            out.final_em(),
            out.epochs_run()
        );
        assert!(out.stopped_early);

        let report = evaluate(&g, &sg, &model, &store, &corpus, cfg.mode);
        assert_eq!(report.matched, 3);
        assert_eq!(report.failures, 0);
        let bucket_total: usize = report.per_hardness.iter().map(|(_, t)| t).sum();
        assert_eq!(bucket_total, report.total);
        assert_eq!(report.summary_lines().len(), 5);
    }

    #[test]
    fn ablation_grid_covers_the_two_by_two() {
        let grid = ablation_grid();
        assert_eq!(grid.len(), 4);
        let mut combos: Vec<(Mode, bool)> = grid.iter().map(|(_, m, a)| (*m, *a)).collect();
        combos.dedup();
        assert_eq!(combos.len(), 4);
        assert!(grid.iter().any(|(n, m, a)| *n == "ours" && *m == Mode::Parallel && *a));
        assert!(
            grid.iter().any(|(n, m, a)| *n == "baseline" && *m == Mode::Sequential && !*a)
        );
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let g = grammar::load_default();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let schemas = parse_schemas(SCHEMA_TEXT).unwrap();
        let corpus = Corpus::prepare(&g, &sg, schemas, &[]).unwrap();
        let (model, mut store) = model_for(&corpus, 1);
        let err = train(&g, &sg, &model, &mut store, &corpus, &TrainConfig::default())
            .unwrap_err();
        assert_eq!(err, TrainError::EmptyCorpus);
    }
}
