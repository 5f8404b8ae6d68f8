//! Shared machinery behind the subcommands: loading the grammar, datasets,
//! and checkpoints from disk; decoding with optional per-clause threads; and
//! the decoding throughput benchmark.

use std::path::Path;
use std::time::Instant;

use parsql_core::corpus::{self, Corpus};
use parsql_core::decoder::{self, ClauseRoll, DecodeCtx, DecodeError, Decoded, Mode, RollInit};
use parsql_core::encoder;
use parsql_core::grammar::{Grammar, NodeTypeId};
use parsql_core::nn::{Model, ParameterStore};
use parsql_core::sql::SqlGrammar;

use crate::config::Settings;
use crate::{checkpoint, CliError};

/// Loads the configured grammar file, or the built-in grammar when none is
/// configured. Returns the resolved pair plus the grammar text (for
/// fingerprint-related diagnostics).
pub fn load_grammar(s: &Settings) -> Result<(Grammar, SqlGrammar), CliError> {
    let text = match &s.grammar {
        None => parsql_core::DEFAULT_GRAMMAR.to_string(),
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read grammar `{}`: {e}", path.display()))
        })?,
    };
    let g = Grammar::load(&text)
        .map_err(|e| CliError::Config(format!("grammar does not load: {e}")))?;
    let sg = SqlGrammar::resolve(&g)
        .map_err(|e| CliError::Config(format!("grammar misses a required rule: {e}")))?;
    Ok((g, sg))
}

/// Reads and prepares the configured dataset + schema catalog.
pub fn load_corpus(s: &Settings, g: &Grammar, sg: &SqlGrammar) -> Result<Corpus, CliError> {
    let dataset_path = s.dataset.as_ref().expect("validated");
    let schemas_path = s.schemas.as_ref().expect("validated");
    let dataset = std::fs::read_to_string(dataset_path)?;
    let schema_text = std::fs::read_to_string(schemas_path)?;
    let raws = corpus::parse_dataset(&dataset)?;
    let schemas = corpus::parse_schemas(&schema_text)?;
    Ok(Corpus::prepare(g, sg, schemas, &raws)?)
}

/// Loads the configured checkpoint against the loaded grammar.
pub fn load_model(s: &Settings, g: &Grammar) -> Result<(Model, ParameterStore), CliError> {
    checkpoint::load(&s.checkpoint_path(), g)
}

/// Decodes one query. With `threads > 1` and parallel mode, each wave's
/// clause rows are spread over up to `threads` OS threads (contiguous
/// chunks, each chunk batch-decoded on its thread); the rolls are bitwise
/// identical to the single-threaded wave, because per-row arithmetic does
/// not depend on the wave grouping.
pub fn decode_one(
    ctx: &DecodeCtx<'_>,
    mode: Mode,
    threads: usize,
) -> Result<Decoded, DecodeError> {
    if mode == Mode::Parallel && threads > 1 {
        decoder::decode_query_driven(ctx, mode, &mut |c, inits, budget| {
            threaded_wave(c, inits, budget, threads)
        })
    } else {
        decoder::decode_query_with(ctx, mode)
    }
}

fn threaded_wave(
    ctx: &DecodeCtx<'_>,
    inits: Vec<(NodeTypeId, RollInit)>,
    budget: usize,
    threads: usize,
) -> Result<Vec<ClauseRoll>, DecodeError> {
    if inits.len() <= 1 || threads <= 1 {
        return decoder::decode_wave(ctx, inits, budget);
    }
    let chunk = inits.len().div_ceil(threads);
    let shared = *ctx;
    let mut chunks: Vec<Vec<(NodeTypeId, RollInit)>> = Vec::new();
    let mut it = inits.into_iter().peekable();
    while it.peek().is_some() {
        chunks.push(it.by_ref().take(chunk).collect());
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|part| scope.spawn(move || decoder::decode_wave(&shared, part, budget)))
            .collect();
        let mut rolls = Vec::new();
        for h in handles {
            rolls.extend(h.join().expect("clause decode thread panicked")?);
        }
        Ok(rolls)
    })
}

/// One throughput measurement: both modes on the same corpus, checkpoint,
/// and precomputed encodings.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub examples: usize,
    pub reps: usize,
    pub warmup: usize,
    pub threads: usize,
    /// Per-repetition wall seconds for a full corpus sweep.
    pub seq_secs: Vec<f64>,
    pub par_secs: Vec<f64>,
    /// Median queries/second.
    pub seq_qps: f64,
    pub par_qps: f64,
    /// `par_qps / seq_qps`.
    pub speedup: f64,
    /// Step-count ceiling on the speedup: total steps over all queries
    /// divided by the parallel-mode wall steps (longest run per wave).
    pub upper_bound: f64,
    pub total_steps: usize,
    pub wall_steps: usize,
}

fn median(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Times full-corpus greedy decoding in both modes. Encodings are computed
/// once up front so the comparison isolates decoding; a stats pass records
/// step counts for the upper bound; `warmup` decodes per mode run untimed
/// before the timed repetitions.
pub fn bench_corpus(
    g: &Grammar,
    model: &Model,
    store: &ParameterStore,
    corpus: &Corpus,
    reps: usize,
    warmup: usize,
    threads: usize,
) -> Result<BenchReport, CliError> {
    if corpus.is_empty() {
        return Err(CliError::runtime("cannot benchmark an empty corpus"));
    }
    let encs: Vec<encoder::EncoderValues> = corpus
        .examples
        .iter()
        .map(|ex| encoder::encode_values(model, store, &ex.question, corpus.schema_of(ex)))
        .collect();
    let ctx_for = |i: usize| DecodeCtx {
        g,
        model,
        store,
        enc: &encs[i],
        schema: corpus.schema_of(&corpus.examples[i]),
        question: &corpus.examples[i].question,
    };

    // Stats pass: decode everything once in parallel mode and accumulate
    // the step counts that define the theoretical speedup ceiling.
    let mut total_steps = 0usize;
    let mut wall_steps = 0usize;
    for i in 0..corpus.len() {
        let decoded = decode_one(&ctx_for(i), Mode::Parallel, threads)
            .map_err(|e| CliError::Runtime(format!("bench decode failed on example {i}: {e}")))?;
        total_steps += decoded.stats.total_steps;
        wall_steps += decoded.stats.wall_steps;
    }
    let upper_bound = if wall_steps == 0 { 1.0 } else { total_steps as f64 / wall_steps as f64 };

    let mut seq_secs = Vec::with_capacity(reps);
    let mut par_secs = Vec::with_capacity(reps);
    for (mode, secs) in [(Mode::Sequential, &mut seq_secs), (Mode::Parallel, &mut par_secs)] {
        for w in 0..warmup {
            decode_one(&ctx_for(w % corpus.len()), mode, threads)
                .map_err(|e| CliError::Runtime(format!("warmup decode failed: {e}")))?;
        }
        for _ in 0..reps {
            let t0 = Instant::now();
            for i in 0..corpus.len() {
                decode_one(&ctx_for(i), mode, threads)
                    .map_err(|e| CliError::Runtime(format!("timed decode failed: {e}")))?;
            }
            secs.push(t0.elapsed().as_secs_f64());
        }
    }

    let n = corpus.len() as f64;
    let seq_qps = n / median(&seq_secs);
    let par_qps = n / median(&par_secs);
    Ok(BenchReport {
        examples: corpus.len(),
        reps,
        warmup,
        threads,
        seq_secs,
        par_secs,
        seq_qps,
        par_qps,
        speedup: par_qps / seq_qps,
        upper_bound,
        total_steps,
        wall_steps,
    })
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use parsql_core::nn::{Dims, Vocab};

    #[test]
    fn medians_handle_odd_and_even_sample_counts() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn threaded_waves_match_single_threaded_waves_bitwise() {
        let g = Grammar::load(parsql_core::DEFAULT_GRAMMAR).unwrap();
        let sg = SqlGrammar::resolve(&g).unwrap();
        let cfg = parsql_core::gen::GenConfig { seed: 40, n: 12, ..Default::default() };
        let (corpus, _) = parsql_core::gen::generate_corpus(&g, &sg, &cfg).unwrap();
        let vocab = Vocab::build(corpus.vocab_words());
        let (model, store) = Model::new(&g, vocab, Dims::default(), 8);

        let mut decoded = 0usize;
        for ex in &corpus.examples {
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
            match (decode_one(&ctx, Mode::Parallel, 1), decode_one(&ctx, Mode::Parallel, 3)) {
                (Ok(plain), Ok(threaded)) => {
                    let acts = |d: &Decoded| {
                        d.steps.iter().map(|s| s.action).collect::<Vec<_>>()
                    };
                    assert_eq!(acts(&plain), acts(&threaded));
                    for (a, b) in plain.steps.iter().zip(&threaded.steps) {
                        let bits =
                            |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                        assert_eq!(bits(&a.p_att), bits(&b.p_att));
                    }
                    decoded += 1;
                }
                // A random-weight model may run a clause into the step
                // budget; threading must fail the same way.
                (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
                (a, b) => panic!(
                    "thread count changed the outcome: single-threaded ok={}, threaded ok={}",
                    a.is_ok(),
                    b.is_ok()
                ),
            }
        }
        assert!(decoded >= corpus.len() / 2, "only {decoded} examples decoded cleanly");
    }
}
