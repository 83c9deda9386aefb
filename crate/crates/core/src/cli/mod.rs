//! Command-line front end: `train`, `encode`, `eval`, `bench`, `linearize`
//! and `synth`.
//!
//! Every subcommand accepts `--config FILE`, a plain-text file of
//! `key=value` lines whose keys are long flag names (`bits=16`). Values from
//! the file are applied first, so flags on the command line win. The run
//! manifest written by `train` has this format, so
//! `emhash train --config manifest.txt` repeats a run. Keys under `timing.`
//! and `format.`, plus `version` and `command`, are informational.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataio::{CodesFormat, FeatureFormat, LabelKind};
use crate::energy_models::LfhCoupling;

pub use commands::{
    run_bench, run_encode, run_eval, run_linearize, run_synth, run_train, BenchRow, TrainOutputs,
};

/// Manifest and config format version.
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "emhash",
    version,
    about = "Supervised hashing by closed-form mean-field solves"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// key=value file applied before the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn codes and an out-of-sample projection from labeled features.
    Train(TrainArgs),
    /// Encode new feature rows with a trained model.
    Encode(EncodeArgs),
    /// Hamming-ranking mAP of query codes against database codes.
    Eval(EvalArgs),
    /// Time EM-KSH training over a grid of sizes on synthetic clusters.
    Bench(BenchArgs),
    /// Print the sigmoid linearization for a half-interval c.
    Linearize(LinearizeArgs),
    /// Write a labeled Gaussian-cluster dataset.
    Synth(SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Encode(_) => "encode",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
            Command::Linearize(_) => "linearize",
            Command::Synth(_) => "synth",
        }
    }
}

const SUBCOMMANDS: [&str; 6] = ["train", "encode", "eval", "bench", "linearize", "synth"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    EmKsh,
    EmSplh,
    EmLfh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Coupling {
    Variational,
    Hard,
}

impl From<Coupling> for LfhCoupling {
    fn from(c: Coupling) -> Self {
        match c {
            Coupling::Variational => LfhCoupling::Variational,
            Coupling::Hard => LfhCoupling::HardAssignment,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Feature file (CSV or EMHMAT01 binary).
    #[arg(long)]
    pub features: PathBuf,
    /// Feature file format; guessed from the extension when absent.
    #[arg(long)]
    pub format: Option<FeatureFormat>,
    /// Label file; otherwise labels come from the last CSV column.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "class")]
    pub label_kind: LabelKind,
    #[arg(long, value_enum, default_value = "em-ksh")]
    pub method: Method,
    /// Code length d.
    #[arg(long, default_value_t = 32)]
    pub bits: usize,
    /// Sampled similarity columns m.
    #[arg(long, default_value_t = 1000)]
    pub anchors: usize,
    /// Sweeps T over the anchors.
    #[arg(long, default_value_t = 3)]
    pub sweeps: usize,
    /// Linearization half-interval, 0 < c < 2.5997.
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    /// Ridge penalty of the projection.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_h: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// LFH coupling (em-lfh only).
    #[arg(long, value_enum, default_value = "variational")]
    pub coupling: Coupling,
    /// Output directory for codes, model, thresholds and manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "text")]
    pub codes_format: CodesFormat,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub format: Option<FeatureFormat>,
    /// Label column present in a CSV query file (ignored).
    #[arg(long, default_value = "none")]
    pub label_kind: LabelKind,
    /// Expected code length; must match the model.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub codes_out: PathBuf,
    #[arg(long, default_value = "text")]
    pub codes_format: CodesFormat,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub db_codes: PathBuf,
    #[arg(long)]
    pub db_labels: PathBuf,
    /// Query codes; the database itself when absent.
    #[arg(long)]
    pub query_codes: Option<PathBuf>,
    /// Query labels; required with --query-codes.
    #[arg(long)]
    pub query_labels: Option<PathBuf>,
    #[arg(long, default_value = "class")]
    pub label_kind: LabelKind,
    /// Drop query q from its own ranking (database item q). Defaults to
    /// true when the queries are the database.
    #[arg(long)]
    pub exclude_self: Option<bool>,
    /// Print per-query average precision.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub per_query: bool,
    /// JSON report path.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    /// Comma-separated point counts.
    #[arg(long, value_delimiter = ',', default_value = "2000,4000")]
    pub n_grid: Vec<usize>,
    /// Comma-separated code lengths.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub bits_grid: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub anchors: usize,
    #[arg(long, default_value_t = 3)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Runs per grid point; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Allowed time ratio per doubling of n.
    #[arg(long, default_value_t = 2.5)]
    pub max_ratio: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Tab-separated timing table.
    #[arg(long)]
    pub table_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct LinearizeArgs {
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    /// Grid points for the maximum approximation error.
    #[arg(long, default_value_t = 10_001)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output features; CSV carries a label column, binary does not.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<FeatureFormat>,
    /// Separate label file.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

/// Parses `args` (program name first), applies `--config`, and runs.
pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = parse(args)?;
    execute(cli)
}

/// Entry point for the binary: reports errors on stderr and maps them to
/// an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(e) => match e.downcast::<clap::Error>() {
            Ok(clap_err) => {
                let _ = clap_err.print();
                return ExitCode::from(clap_err.exit_code() as u8);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse<I, T>(args: I) -> anyhow::Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = expand_config(args)?;
    Ok(Cli::try_parse_from(args)?)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    pool.install(|| match &cli.command {
        Command::Train(a) => run_train(a).map(|_| ()),
        Command::Encode(a) => run_encode(a),
        Command::Eval(a) => run_eval(a).map(|_| ()),
        Command::Bench(a) => run_bench(a).map(|_| ()),
        Command::Linearize(a) => run_linearize(a),
        Command::Synth(a) => run_synth(a),
    })
}

/// Replaces `--config FILE` with the file's flags, inserted right after the
/// subcommand so later command-line flags override them.
fn expand_config(mut args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file");
            }
            config = Some(PathBuf::from(args.remove(i + 1)));
            args.remove(i);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let Some(sub) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        bail!("--config needs a subcommand");
    };
    let command = args[sub].to_string_lossy().into_owned();
    let flags = config_flags(&path, &command)?;
    let tail = args.split_off(sub + 1);
    args.extend(flags);
    args.extend(tail);
    Ok(args)
}

/// Reads a `key=value` file into `--key value` pairs.
pub fn config_flags(path: &Path, command: &str) -> anyhow::Result<Vec<OsString>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), lineno + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "version" => {
                if value != MANIFEST_VERSION.to_string() {
                    bail!("{}: unsupported config version {value}", path.display());
                }
            }
            "command" => {
                if value != command {
                    bail!("{}: written for `{value}`, not `{command}`", path.display());
                }
            }
            k if k.starts_with("timing.") || k.starts_with("format.") => {}
            k => {
                flags.push(OsString::from(format!("--{k}")));
                flags.push(OsString::from(value));
            }
        }
    }
    Ok(flags)
}

impl Cli {
    pub fn command_name(&self) -> &'static str {
        self.command.name()
    }
}
