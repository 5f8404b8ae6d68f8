//! The seven subcommands. Each validates its settings (reporting every
//! problem at once), does the work through `parsql-core`, prints a human
//! table to standard output, and writes the same numbers as CSV under the
//! output directory.

use std::path::PathBuf;

use parsql_core::align;
use parsql_core::ast::Action;
use parsql_core::corpus::{self, Corpus, Hardness};
use parsql_core::decoder::DecodeCtx;
use parsql_core::encoder;
use parsql_core::gen::{self, GenConfig};
use parsql_core::grammar::ClauseKind;
use parsql_core::nn::{Model, Vocab};
use parsql_core::sql;
use parsql_core::train::{self, EvalReport, TrainConfig};

use crate::config::{Need, Settings};
use crate::report::{table, write_csv};
use crate::runner::{self, bench_corpus, decode_one, load_corpus, load_grammar, load_model};
use crate::{checkpoint, CliError};

fn out_path(s: &Settings, name: &str) -> PathBuf {
    s.out_dir.join(name)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

/// Generates a corpus and writes the dataset + schema catalog files. The
/// `dataset`/`schemas` settings name the output files here (they are inputs
/// everywhere else) and default into the output directory.
pub fn cmd_gen(s: &Settings) -> Result<(), CliError> {
    s.validate(&[Need::Grammar])?;
    let (g, sg) = load_grammar(s)?;
    let cfg = GenConfig {
        seed: s.seed,
        n: s.n,
        num_dbs: s.num_dbs,
        paraphrase_rate: s.paraphrase_rate,
        profile: s.profile,
        ..GenConfig::default()
    };
    let generated = gen::generate(&sg, &cfg)?;
    // Preparing the freshly generated corpus proves it is self-consistent
    // before anything is written, and yields the summary numbers.
    let corpus = Corpus::prepare(&g, &sg, generated.schemas.clone(), &generated.raws)?;

    let dataset_path = s.dataset.clone().unwrap_or_else(|| out_path(s, "dataset.txt"));
    let schemas_path = s.schemas.clone().unwrap_or_else(|| out_path(s, "schemas.txt"));
    runner::write_text(&dataset_path, &corpus::format_dataset(&generated.raws))?;
    runner::write_text(&schemas_path, &corpus::format_schemas(&generated.schemas))?;

    let pairs: Vec<_> = corpus.examples.iter().map(|e| e.align.clone()).collect();
    let stats = align::alignment_stats(&pairs)?;
    let hard = corpus.hardness_counts();
    let rows: Vec<Vec<String>> = vec![
        vec!["examples".into(), corpus.len().to_string()],
        vec!["databases".into(), generated.schemas.len().to_string()],
        vec![
            "paraphrased".into(),
            generated.paraphrased.iter().filter(|p| **p).count().to_string(),
        ],
        vec!["fallback_pairs".into(), stats.fallback_pairs.to_string()],
        vec!["fallback_fraction".into(), format!("{:.4}", stats.fallback_fraction())],
        vec!["easy".into(), hard[0].to_string()],
        vec!["medium".into(), hard[1].to_string()],
        vec!["hard".into(), hard[2].to_string()],
        vec!["extra".into(), hard[3].to_string()],
    ];
    println!("{}", table(&["quantity", "value"], &rows));
    println!("dataset written to {}", dataset_path.display());
    println!("schemas written to {}", schemas_path.display());
    write_csv(&out_path(s, "gen_summary.csv"), &["quantity", "value"], &rows)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn cmd_train(s: &Settings) -> Result<(), CliError> {
    s.validate(&[Need::Grammar, Need::Dataset, Need::Schemas, Need::TrainKnobs])?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;
    let vocab = Vocab::build(corpus.vocab_words());
    let (model, mut store) = Model::new(&g, vocab, s.dims, s.seed);
    let cfg = TrainConfig {
        mode: s.mode,
        use_align: s.align,
        align_weight: s.align_weight,
        align_mean: s.align_mean,
        lr: s.lr,
        clip: s.clip,
        epochs: s.epochs,
        batch_size: s.batch_size,
        seed: s.seed,
        stop_at_em: s.stop_at_em,
    };
    let outcome = train::train(&g, &sg, &model, &mut store, &corpus, &cfg)?;

    let metric_rows: Vec<Vec<String>> = outcome
        .metrics
        .iter()
        .map(|m| {
            vec![
                m.epoch.to_string(),
                format!("{:.6}", m.action_nll),
                format!("{:.6}", m.align_loss),
                format!("{:.6}", m.total),
                format!("{:.4}", m.train_em),
            ]
        })
        .collect();
    let header = ["epoch", "action_nll", "align_loss", "total", "train_em"];
    println!("{}", table(&header, &metric_rows));
    write_csv(&out_path(s, "metrics.csv"), &header, &metric_rows)?;

    let pairs: Vec<_> = corpus.examples.iter().map(|e| e.align.clone()).collect();
    let stats = align::alignment_stats(&pairs)?;
    println!(
        "alignment: {} pairs, fallback fraction {:.4}",
        stats.pairs,
        stats.fallback_fraction()
    );
    write_alignment_stats(s, &stats)?;

    let ckpt = s.checkpoint_path();
    if let Some(dir) = ckpt.parent() {
        std::fs::create_dir_all(dir)?;
    }
    checkpoint::save(&ckpt, &model, &store)?;
    let final_em = outcome.final_em();
    println!(
        "trained {} epochs ({}), final train EM {:.4}; checkpoint written to {}",
        outcome.epochs_run(),
        if outcome.stopped_early { "stopped early at target" } else { "full schedule" },
        final_em,
        ckpt.display()
    );
    Ok(())
}

fn write_alignment_stats(s: &Settings, stats: &align::AlignmentStats) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for kind in ClauseKind::ALL {
        let cs = &stats.per_clause[kind.index()];
        let proper_tokens: usize = cs.len_hist.iter().map(|(len, n)| len * n).sum();
        let mean_len =
            if cs.proper == 0 { 0.0 } else { proper_tokens as f64 / cs.proper as f64 };
        rows.push(vec![
            kind.name().to_string(),
            cs.proper.to_string(),
            cs.whole.to_string(),
            format!("{mean_len:.2}"),
        ]);
    }
    write_csv(
        &out_path(s, "align_stats.csv"),
        &["clause", "proper_pairs", "whole_question_pairs", "mean_proper_len"],
        &rows,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub fn cmd_eval(s: &Settings) -> Result<(), CliError> {
    let mut needs = vec![Need::Grammar, Need::Dataset, Need::Schemas];
    if !s.oracle {
        needs.push(Need::Checkpoint);
    }
    s.validate(&needs)?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;

    let report = if s.oracle {
        oracle_replay_report(&g, &sg, &corpus)?
    } else {
        let (model, store) = load_model(s, &g)?;
        train::evaluate(&g, &sg, &model, &store, &corpus, s.mode)
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (hardness, (matched, total)) in Hardness::ALL.into_iter().zip(report.per_hardness) {
        let em = if total == 0 { 0.0 } else { matched as f64 / total as f64 };
        rows.push(vec![
            hardness.name().to_string(),
            matched.to_string(),
            total.to_string(),
            format!("{em:.4}"),
        ]);
    }
    let validity = if report.total == 0 {
        1.0
    } else {
        (report.total - report.failures) as f64 / report.total as f64
    };
    rows.push(vec![
        "overall".to_string(),
        report.matched.to_string(),
        report.total.to_string(),
        format!("{:.4}", report.em()),
    ]);
    rows.push(vec![
        "grammar_valid".to_string(),
        (report.total - report.failures).to_string(),
        report.total.to_string(),
        format!("{validity:.4}"),
    ]);
    let header = ["bucket", "matched", "total", "rate"];
    println!("{}", table(&header, &rows));
    write_csv(&out_path(s, "eval.csv"), &header, &rows)?;
    Ok(())
}

/// Replays each example's gold action trace through the grammar and scores
/// the result — a model-free sanity path that must reach exact match 1.0 on
/// any well-formed corpus.
fn oracle_replay_report(
    g: &parsql_core::grammar::Grammar,
    sg: &sql::SqlGrammar,
    corpus: &Corpus,
) -> Result<EvalReport, CliError> {
    let mut report =
        EvalReport { total: corpus.len(), matched: 0, failures: 0, per_hardness: [(0, 0); 4] };
    for ex in &corpus.examples {
        let schema = corpus.schema_of(ex);
        let bucket = ex.hardness.index();
        report.per_hardness[bucket].1 += 1;
        let ok = parsql_core::ast::replay(g, schema, &ex.question, &ex.trace.actions)
            .ok()
            .and_then(|ast| sql::ast_to_spec(&ast, sg, g).ok())
            .is_some_and(|spec| corpus::exact_match(&spec, ex, schema));
        if ok {
            report.matched += 1;
            report.per_hardness[bucket].0 += 1;
        } else {
            report.failures += 1;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

pub fn cmd_decode(s: &Settings) -> Result<(), CliError> {
    s.validate(&[Need::Grammar, Need::Dataset, Need::Schemas, Need::Checkpoint])?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;
    let (model, store) = load_model(s, &g)?;
    let limit = s.limit.unwrap_or(corpus.len()).min(corpus.len());

    let mut rows = Vec::new();
    let mut matched = 0usize;
    for (i, ex) in corpus.examples.iter().take(limit).enumerate() {
        let schema = corpus.schema_of(ex);
        let enc = encoder::encode_values(&model, &store, &ex.question, schema);
        let ctx = DecodeCtx {
            g: &g,
            model: &model,
            store: &store,
            enc: &enc,
            schema,
            question: &ex.question,
        };
        let outcome = decode_one(&ctx, s.mode, s.threads)
            .map_err(|e| e.to_string())
            .and_then(|d| sql::ast_to_spec(&d.ast, &sg, &g).map_err(|e| e.to_string()));
        let (rendered, em) = match outcome {
            Ok(spec) => {
                let em = corpus::exact_match(&spec, ex, schema);
                (sql::render_spec(&spec, schema), em)
            }
            Err(e) => (format!("error: {e}"), false),
        };
        if em {
            matched += 1;
        }
        println!("{i}\t{}\t{rendered}", ex.db_id);
        rows.push(vec![
            i.to_string(),
            ex.db_id.clone(),
            if em { "1" } else { "0" }.to_string(),
            rendered,
            ex.sql.clone(),
        ]);
    }
    println!("exact match {matched}/{limit}");
    write_csv(
        &out_path(s, "predictions.csv"),
        &["index", "db_id", "exact_match", "predicted_sql", "gold_sql"],
        &rows,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

pub fn cmd_bench(s: &Settings) -> Result<(), CliError> {
    s.validate(&[
        Need::Grammar,
        Need::Dataset,
        Need::Schemas,
        Need::Checkpoint,
        Need::BenchKnobs,
    ])?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;
    let (model, store) = load_model(s, &g)?;
    let report = bench_corpus(&g, &model, &store, &corpus, s.reps, s.warmup, s.threads)?;

    let mut rows = Vec::new();
    for (mode, secs) in
        [("sequential", &report.seq_secs), ("parallel", &report.par_secs)]
    {
        for (rep, sec) in secs.iter().enumerate() {
            rows.push(vec![
                mode.to_string(),
                rep.to_string(),
                format!("{sec:.6}"),
                format!("{:.2}", report.examples as f64 / sec),
            ]);
        }
    }
    let header = ["mode", "rep", "seconds", "queries_per_second"];
    println!("{}", table(&header, &rows));
    let summary = vec![
        vec!["examples".to_string(), report.examples.to_string()],
        vec!["threads".to_string(), report.threads.to_string()],
        vec!["sequential_qps_median".to_string(), format!("{:.2}", report.seq_qps)],
        vec!["parallel_qps_median".to_string(), format!("{:.2}", report.par_qps)],
        vec!["speedup".to_string(), format!("{:.4}", report.speedup)],
        vec!["upper_bound".to_string(), format!("{:.4}", report.upper_bound)],
        vec!["total_steps".to_string(), report.total_steps.to_string()],
        vec!["wall_steps".to_string(), report.wall_steps.to_string()],
    ];
    println!("{}", table(&["quantity", "value"], &summary));
    if report.threads > 1 {
        println!(
            "note: parallel decoding used up to {} per-clause threads; sequential stayed \
             single-threaded",
            report.threads
        );
    }
    write_csv(&out_path(s, "bench.csv"), &header, &rows)?;
    write_csv(&out_path(s, "bench_summary.csv"), &["quantity", "value"], &summary)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

pub fn cmd_align(s: &Settings) -> Result<(), CliError> {
    s.validate(&[Need::Grammar, Need::Dataset, Need::Schemas])?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;
    let pairs: Vec<_> = corpus.examples.iter().map(|e| e.align.clone()).collect();
    let stats = align::alignment_stats(&pairs)?;

    let mut seg_rows = Vec::new();
    for (i, ex) in corpus.examples.iter().enumerate() {
        for kind in ClauseKind::ALL {
            let seg = ex.align.segment(kind);
            let span = seg.span(ex.question.len());
            seg_rows.push(vec![
                i.to_string(),
                kind.name().to_string(),
                if seg.is_whole() { "whole" } else { "proper" }.to_string(),
                span.start.to_string(),
                span.end.to_string(),
            ]);
        }
    }
    write_csv(
        &out_path(s, "segments.csv"),
        &["example", "clause", "kind", "start", "end"],
        &seg_rows,
    )?;
    write_alignment_stats(s, &stats)?;

    let mut rows = Vec::new();
    for kind in ClauseKind::ALL {
        let cs = &stats.per_clause[kind.index()];
        rows.push(vec![kind.name().to_string(), cs.proper.to_string(), cs.whole.to_string()]);
    }
    println!("{}", table(&["clause", "proper_pairs", "whole_question_pairs"], &rows));
    println!(
        "{} pairs, {} whole-question fallbacks (fraction {:.4})",
        stats.pairs,
        stats.fallback_pairs,
        stats.fallback_fraction()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// attn
// ---------------------------------------------------------------------------

/// Dumps the decoder's attention for one example: one CSV row per
/// `ApplyRule` step (labeled with its clause and rule) and, below them, the
/// six alignment-prior rows for side-by-side comparison.
pub fn cmd_attn(s: &Settings) -> Result<(), CliError> {
    s.validate(&[Need::Grammar, Need::Dataset, Need::Schemas, Need::Checkpoint])?;
    let (g, sg) = load_grammar(s)?;
    let corpus = load_corpus(s, &g, &sg)?;
    if s.example >= corpus.len() {
        return Err(CliError::Runtime(format!(
            "example id {} is out of range: the corpus has {} examples",
            s.example,
            corpus.len()
        )));
    }
    let (model, store) = load_model(s, &g)?;
    let ex = &corpus.examples[s.example];
    let schema = corpus.schema_of(ex);
    let enc = encoder::encode_values(&model, &store, &ex.question, schema);
    let ctx = DecodeCtx {
        g: &g,
        model: &model,
        store: &store,
        enc: &enc,
        schema,
        question: &ex.question,
    };
    let decoded = decode_one(&ctx, s.mode, s.threads)?;

    let mut out = String::from("row,clause,rule");
    for tok in &ex.question {
        out.push(',');
        out.push_str(&crate::report::csv_field(tok));
    }
    out.push('\n');
    let mut att_rows = 0usize;
    for step in &decoded.steps {
        if let Action::ApplyRule(r) = step.action {
            out.push_str("att,");
            out.push_str(step.clause.name());
            out.push(',');
            out.push_str(&crate::report::csv_field(&g.rule_text(r)));
            for v in &step.p_att {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
            att_rows += 1;
        }
    }
    for kind in ClauseKind::ALL {
        out.push_str("prior,");
        out.push_str(kind.name());
        out.push(',');
        for v in &ex.priors[kind.index()] {
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    let path = out_path(s, &format!("attn_{}.csv", s.example));
    runner::write_text(&path, &out)?;

    // Per-clause attention mass inside the aligned segment vs the uniform
    // baseline, over the decoded ApplyRule steps.
    let mut rows = Vec::new();
    for kind in ClauseKind::ALL {
        let seg = ex.align.segment(kind);
        let span = seg.span(ex.question.len());
        let steps: Vec<&Vec<f64>> = decoded
            .steps
            .iter()
            .filter(|st| st.clause == kind && matches!(st.action, Action::ApplyRule(_)))
            .map(|st| &st.p_att)
            .collect();
        let mass = if steps.is_empty() {
            0.0
        } else {
            steps
                .iter()
                .map(|p| p[span.start..span.end].iter().sum::<f64>())
                .sum::<f64>()
                / steps.len() as f64
        };
        let baseline = span.len() as f64 / ex.question.len() as f64;
        rows.push(vec![
            kind.name().to_string(),
            if seg.is_whole() { "whole" } else { "proper" }.to_string(),
            steps.len().to_string(),
            format!("{mass:.4}"),
            format!("{baseline:.4}"),
        ]);
    }
    println!(
        "{}",
        table(&["clause", "segment", "apply_rule_steps", "mean_mass", "baseline"], &rows)
    );
    println!("{att_rows} attention rows written to {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_paths_land_in_the_output_directory() {
        let s = Settings { out_dir: PathBuf::from("/tmp/somewhere"), ..Settings::default() };
        assert_eq!(out_path(&s, "metrics.csv"), PathBuf::from("/tmp/somewhere/metrics.csv"));
    }
}
