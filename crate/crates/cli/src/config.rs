//! Run settings: defaults, the flat `key = value` config file, and
//! command-line overrides, applied in that precedence order (defaults first,
//! file next, flags last).
//!
//! The config file is plain UTF-8 text, one `key = value` pair per line;
//! blank lines and `#` comments are skipped. Keys mirror the field names
//! below. When a file sets a key twice the later line wins. Every malformed
//! line and unknown key is collected, and the whole list is reported in one
//! configuration error, so a broken file surfaces all its problems at once.

use std::path::{Path, PathBuf};

use parsql_core::decoder::Mode;
use parsql_core::gen::GenProfile;
use parsql_core::nn::Dims;

use crate::CliError;

/// Everything a subcommand might need, merged from defaults, the config
/// file, and flags. Subcommands read only the fields they use.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Grammar file; `None` uses the built-in grammar.
    pub grammar: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub schemas: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Checkpoint path; `None` defaults to `<out_dir>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
    pub mode: Mode,
    pub align: bool,
    pub align_weight: f64,
    pub align_mean: bool,
    pub seed: u64,
    pub lr: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Early-stop target for train exact match; `none` disables.
    pub stop_at_em: Option<f64>,
    pub dims: Dims,
    // Generator knobs.
    pub n: usize,
    pub num_dbs: usize,
    pub paraphrase_rate: f64,
    pub profile: GenProfile,
    // Bench knobs.
    pub reps: usize,
    pub warmup: usize,
    /// 1 keeps decoding on a single execution unit; above 1 enables
    /// per-clause threads in parallel-mode decoding.
    pub threads: usize,
    // Decode/eval/attn knobs.
    pub limit: Option<usize>,
    pub example: usize,
    pub oracle: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            grammar: None,
            dataset: None,
            schemas: None,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            mode: Mode::Parallel,
            align: true,
            align_weight: 1.0,
            align_mean: false,
            seed: 0,
            lr: 1e-3,
            clip: 5.0,
            epochs: 200,
            batch_size: 8,
            stop_at_em: Some(1.0),
            dims: Dims::default(),
            n: 100,
            num_dbs: 4,
            paraphrase_rate: 0.0,
            profile: GenProfile::Mixed,
            reps: 5,
            warmup: 10,
            threads: 1,
            limit: None,
            example: 0,
            oracle: false,
        }
    }
}

pub fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

pub fn parse_mode(value: &str) -> Result<Mode, String> {
    Mode::from_name(value).ok_or_else(|| format!("expected sequential or parallel, got `{value}`"))
}

pub fn parse_profile(value: &str) -> Result<GenProfile, String> {
    match value {
        "mixed" => Ok(GenProfile::Mixed),
        "bench" => Ok(GenProfile::Bench),
        other => Err(format!("expected mixed or bench, got `{other}`")),
    }
}

macro_rules! parsed {
    ($value:expr, $ty:ty, $what:expr) => {
        $value.parse::<$ty>().map_err(|_| format!(concat!("expected ", $what, ", got `{}`"), $value))
    };
}

impl Settings {
    /// Applies one `key = value` pair. Unknown keys and unparseable values
    /// are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "grammar" => self.grammar = Some(PathBuf::from(value)),
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "schemas" => self.schemas = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "mode" => self.mode = parse_mode(value)?,
            "align" => self.align = parse_bool(value)?,
            "align_weight" => self.align_weight = parsed!(value, f64, "a number")?,
            "align_mean" => self.align_mean = parse_bool(value)?,
            "seed" => self.seed = parsed!(value, u64, "an unsigned integer")?,
            "lr" => self.lr = parsed!(value, f64, "a number")?,
            "clip" => self.clip = parsed!(value, f64, "a number")?,
            "epochs" => self.epochs = parsed!(value, usize, "an unsigned integer")?,
            "batch_size" => self.batch_size = parsed!(value, usize, "an unsigned integer")?,
            "stop_at_em" => {
                self.stop_at_em = if value == "none" {
                    None
                } else {
                    Some(parsed!(value, f64, "a number or none")?)
                }
            }
            "word_dim" => self.dims.word = parsed!(value, usize, "an unsigned integer")?,
            "action_dim" => self.dims.action = parsed!(value, usize, "an unsigned integer")?,
            "node_dim" => self.dims.node = parsed!(value, usize, "an unsigned integer")?,
            "kind_dim" => self.dims.kind = parsed!(value, usize, "an unsigned integer")?,
            "enc_hidden" => self.dims.enc_hidden = parsed!(value, usize, "an unsigned integer")?,
            "dec_hidden" => self.dims.dec_hidden = parsed!(value, usize, "an unsigned integer")?,
            "n" => self.n = parsed!(value, usize, "an unsigned integer")?,
            "num_dbs" => self.num_dbs = parsed!(value, usize, "an unsigned integer")?,
            "paraphrase_rate" => self.paraphrase_rate = parsed!(value, f64, "a number")?,
            "profile" => self.profile = parse_profile(value)?,
            "reps" => self.reps = parsed!(value, usize, "an unsigned integer")?,
            "warmup" => self.warmup = parsed!(value, usize, "an unsigned integer")?,
            "threads" => self.threads = parsed!(value, usize, "an unsigned integer")?,
            "limit" => {
                self.limit = if value == "none" {
                    None
                } else {
                    Some(parsed!(value, usize, "an unsigned integer or none")?)
                }
            }
            "example" => self.example = parsed!(value, usize, "an unsigned integer")?,
            "oracle" => self.oracle = parse_bool(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies a whole config file, collecting every problem before failing.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        let mut problems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                None => problems.push(format!("line {}: expected `key = value`", i + 1)),
                Some((key, value)) => {
                    if let Err(e) = self.set(key.trim(), value.trim()) {
                        problems.push(format!("line {}: {e}", i + 1));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    /// Reads and applies a config file from disk.
    pub fn apply_config_path(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        self.apply_file(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Path checks and numeric sanity for the fields a command is about to
    /// use; every violation is reported, not just the first.
    pub fn validate(&self, needs: &[Need]) -> Result<(), CliError> {
        let mut problems = Vec::new();
        for need in needs {
            match need {
                Need::Dataset => {
                    check_path(&mut problems, "dataset", &self.dataset);
                }
                Need::Schemas => {
                    check_path(&mut problems, "schemas", &self.schemas);
                }
                Need::Checkpoint => {
                    let path = self.checkpoint_path();
                    if !path.is_file() {
                        problems.push(format!("checkpoint `{}` does not exist", path.display()));
                    }
                }
                Need::Grammar => {
                    if let Some(p) = &self.grammar {
                        if !p.is_file() {
                            problems.push(format!("grammar `{}` does not exist", p.display()));
                        }
                    }
                }
                Need::TrainKnobs => {
                    if !(self.lr.is_finite() && self.lr > 0.0) {
                        problems.push(format!("lr must be a positive number, got {}", self.lr));
                    }
                    if !(self.clip.is_finite() && self.clip > 0.0) {
                        problems.push(format!("clip must be a positive number, got {}", self.clip));
                    }
                    if self.epochs == 0 {
                        problems.push("epochs must be at least 1".to_string());
                    }
                    if self.batch_size == 0 {
                        problems.push("batch_size must be at least 1".to_string());
                    }
                    if !(self.align_weight.is_finite() && self.align_weight >= 0.0) {
                        problems.push(format!(
                            "align_weight must be a non-negative number, got {}",
                            self.align_weight
                        ));
                    }
                }
                Need::BenchKnobs => {
                    if self.reps < 5 {
                        problems.push(format!("reps must be at least 5, got {}", self.reps));
                    }
                    if self.warmup < 10 {
                        problems.push(format!("warmup must be at least 10, got {}", self.warmup));
                    }
                    if self.threads == 0 {
                        problems.push("threads must be at least 1".to_string());
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("model.ckpt"))
    }
}

/// One prerequisite bundle for [`Settings::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Dataset,
    Schemas,
    Checkpoint,
    Grammar,
    TrainKnobs,
    BenchKnobs,
}

fn check_path(problems: &mut Vec<String>, what: &str, path: &Option<PathBuf>) {
    match path {
        None => problems.push(format!("{what} path is required (flag --{what} or config key)")),
        Some(p) if !p.is_file() => {
            problems.push(format!("{what} `{}` does not exist", p.display()));
        }
        Some(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults_and_collect_all_problems() {
        let mut s = Settings::default();
        s.apply_file("# comment\n\nseed = 9\nmode = sequential\nalign = off\n").unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.mode, Mode::Sequential);
        assert!(!s.align);

        let err = s.apply_file("seed = x\nbogus = 1\nnoequals\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(msg.contains("unknown key `bogus`"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn later_file_lines_win_and_stop_at_em_accepts_none() {
        let mut s = Settings::default();
        s.apply_file("seed = 1\nseed = 2\nstop_at_em = none\n").unwrap();
        assert_eq!(s.seed, 2);
        assert_eq!(s.stop_at_em, None);
    }

    #[test]
    fn validation_reports_every_missing_prerequisite() {
        let s = Settings::default();
        let err = s.validate(&[Need::Dataset, Need::Schemas, Need::Checkpoint]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("dataset path is required"), "{msg}");
        assert!(msg.contains("schemas path is required"), "{msg}");
        assert!(msg.contains("checkpoint"), "{msg}");
    }

    #[test]
    fn train_knob_validation_lists_each_bad_value() {
        let mut s = Settings::default();
        s.set("lr", "-1").unwrap();
        s.set("epochs", "0").unwrap();
        let msg = s.validate(&[Need::TrainKnobs]).unwrap_err().to_string();
        assert!(msg.contains("lr must be"), "{msg}");
        assert!(msg.contains("epochs must be"), "{msg}");
    }
}
