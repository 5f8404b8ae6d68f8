//! Command-line front end. Settings are resolved in fixed precedence:
//! built-in defaults, then the `--config` file, then global flags, then
//! subcommand flags. Exit codes: 0 on success, 2 for configuration and
//! usage errors, 3 for runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parsql::config::{parse_bool, parse_mode, parse_profile, Settings};
use parsql::{commands, CliError};
use parsql_core::decoder::Mode;
use parsql_core::gen::GenProfile;

#[derive(Parser)]
#[command(
    name = "parsql",
    version,
    about = "Grammar-based text-to-SQL with clause-parallel decoding"
)]
struct Cli {
    /// Flat `key = value` configuration file, applied before any flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base random seed (generation, initialization, shuffling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Decoding order: `parallel` or `sequential`.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Alignment loss term: `on` or `off`.
    #[arg(long, global = true, value_parser = parse_bool)]
    align: Option<bool>,
    /// Directory for reports and default artifact locations.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Grammar file (defaults to the built-in SQL grammar).
    #[arg(long, global = true, value_name = "FILE")]
    grammar: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Dataset + schema catalog locations shared by most subcommands.
#[derive(Args)]
struct DataArgs {
    /// Dataset file, one example per line.
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Schema catalog file.
    #[arg(long, value_name = "FILE")]
    schemas: Option<PathBuf>,
}

#[derive(Args)]
struct CheckpointArg {
    /// Model checkpoint (defaults to `<out_dir>/model.ckpt`).
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus (dataset + schema catalog).
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// Number of examples.
        #[arg(long)]
        n: Option<usize>,
        /// Number of distinct databases.
        #[arg(long)]
        num_dbs: Option<usize>,
        /// Fraction of questions phrased without schema words.
        #[arg(long)]
        paraphrase_rate: Option<f64>,
        /// Corpus profile: `mixed` or `bench`.
        #[arg(long, value_parser = parse_profile)]
        profile: Option<GenProfile>,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ckpt: CheckpointArg,
        #[arg(long)]
        lr: Option<f64>,
        /// Global-norm gradient clip.
        #[arg(long)]
        clip: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Weight of the alignment loss term.
        #[arg(long)]
        align_weight: Option<f64>,
        /// Normalize the alignment term per step: `on` or `off`.
        #[arg(long, value_parser = parse_bool)]
        align_mean: Option<bool>,
        /// Early-stop once train exact match reaches this value; `none` disables.
        #[arg(long, value_name = "EM|none")]
        stop_at_em: Option<String>,
    },
    /// Score a checkpoint (or the gold-trace oracle) on a dataset.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Replay gold action traces instead of decoding with a model.
        #[arg(long)]
        oracle: bool,
    },
    /// Decode a dataset and print the predicted SQL.
    Decode {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Decode only the first N examples.
        #[arg(long)]
        limit: Option<usize>,
        /// Per-clause worker threads for parallel-mode decoding.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Measure sequential vs parallel decoding throughput.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Timed repetitions per mode (median is reported).
        #[arg(long)]
        reps: Option<usize>,
        /// Untimed warmup decodes per mode.
        #[arg(long)]
        warmup: Option<usize>,
        /// Per-clause worker threads for parallel-mode decoding.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Report clause-to-span alignment coverage for a dataset.
    Align {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Dump decoder attention next to the alignment priors for one example.
    Attn {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Zero-based example index.
        #[arg(long)]
        example: Option<usize>,
        /// Per-clause worker threads for parallel-mode decoding.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn build_settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_config_path(path)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(mode) = cli.mode {
        s.mode = mode;
    }
    if let Some(align) = cli.align {
        s.align = align;
    }
    if let Some(dir) = &cli.out_dir {
        s.out_dir = dir.clone();
    }
    if let Some(path) = &cli.grammar {
        s.grammar = Some(path.clone());
    }

    fn merge<T: Clone>(slot: &mut T, flag: &Option<T>) {
        if let Some(v) = flag {
            *slot = v.clone();
        }
    }
    fn merge_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    fn merge_data(s: &mut Settings, data: &DataArgs) {
        merge_path(&mut s.dataset, &data.dataset);
        merge_path(&mut s.schemas, &data.schemas);
    }

    match &cli.cmd {
        Cmd::Gen { data, n, num_dbs, paraphrase_rate, profile } => {
            merge_data(&mut s, data);
            merge(&mut s.n, n);
            merge(&mut s.num_dbs, num_dbs);
            merge(&mut s.paraphrase_rate, paraphrase_rate);
            merge(&mut s.profile, profile);
        }
        Cmd::Train {
            data,
            ckpt,
            lr,
            clip,
            epochs,
            batch_size,
            align_weight,
            align_mean,
            stop_at_em,
        } => {
            merge_data(&mut s, data);
            merge_path(&mut s.checkpoint, &ckpt.checkpoint);
            merge(&mut s.lr, lr);
            merge(&mut s.clip, clip);
            merge(&mut s.epochs, epochs);
            merge(&mut s.batch_size, batch_size);
            merge(&mut s.align_weight, align_weight);
            merge(&mut s.align_mean, align_mean);
            if let Some(v) = stop_at_em {
                s.set("stop_at_em", v).map_err(CliError::Config)?;
            }
        }
        Cmd::Eval { data, ckpt, oracle } => {
            merge_data(&mut s, data);
            merge_path(&mut s.checkpoint, &ckpt.checkpoint);
            if *oracle {
                s.oracle = true;
            }
        }
        Cmd::Decode { data, ckpt, limit, threads } => {
            merge_data(&mut s, data);
            merge_path(&mut s.checkpoint, &ckpt.checkpoint);
            if limit.is_some() {
                s.limit = *limit;
            }
            merge(&mut s.threads, threads);
        }
        Cmd::Bench { data, ckpt, reps, warmup, threads } => {
            merge_data(&mut s, data);
            merge_path(&mut s.checkpoint, &ckpt.checkpoint);
            merge(&mut s.reps, reps);
            merge(&mut s.warmup, warmup);
            merge(&mut s.threads, threads);
        }
        Cmd::Align { data } => merge_data(&mut s, data),
        Cmd::Attn { data, ckpt, example, threads } => {
            merge_data(&mut s, data);
            merge_path(&mut s.checkpoint, &ckpt.checkpoint);
            merge(&mut s.example, example);
            merge(&mut s.threads, threads);
        }
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let s = build_settings(cli)?;
    match &cli.cmd {
        Cmd::Gen { .. } => commands::cmd_gen(&s),
        Cmd::Train { .. } => commands::cmd_train(&s),
        Cmd::Eval { .. } => commands::cmd_eval(&s),
        Cmd::Decode { .. } => commands::cmd_decode(&s),
        Cmd::Bench { .. } => commands::cmd_bench(&s),
        Cmd::Align { .. } => commands::cmd_align(&s),
        Cmd::Attn { .. } => commands::cmd_attn(&s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("parsql: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
