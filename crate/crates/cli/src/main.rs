//! `gme`: device generation, dataset building, training, evaluation and the
//! experiment drivers, with seeded runs and file-based artifacts.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status of a failed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Other = 1,
    Usage = 2,
    Fingerprint = 3,
    Validation = 4,
}

/// Error carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: Failure, msg: impl std::fmt::Display) -> Self {
        Self { kind, error: anyhow::anyhow!("{msg}") }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let error = e.into();
        let kind = error
            .chain()
            .find_map(|c| c.downcast_ref::<gme_core::Error>())
            .map(|e| match e {
                gme_core::Error::FingerprintMismatch { .. } => Failure::Fingerprint,
                gme_core::Error::NotHermitian(_)
                | gme_core::Error::InvalidTrace(_)
                | gme_core::Error::NotPositive(_) => Failure::Validation,
                _ => Failure::Other,
            })
            .unwrap_or(Failure::Other);
        Self { kind, error }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "gme", version, about = "Genuine multipartite entanglement from local measurement statistics")]
pub struct Cli {
    /// Worker threads for generation and featurization.
    #[arg(long, env = "GME_JOBS", global = true)]
    pub jobs: Option<usize>,
    /// JSON object of flag defaults (keys are flag names); explicit flags win.
    #[arg(long, global = true)]
    pub run_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample Haar-random measurement devices.
    GenDevices(GenDevices),
    /// Build a labeled dataset from a device file.
    GenDataset(GenDataset),
    /// Train a classifier on a dataset.
    Train(Train),
    /// Accuracy of a model on a dataset.
    Eval(Eval),
    /// Noise scan of a Werner-type family.
    Scan(Scan),
    /// Prediction map of the qutrit family over (alpha, beta).
    AlphaBeta(AlphaBeta),
    /// Graph-state study on k-correlation features.
    Graph(Graph),
    /// 4-qubit retraining on k-correlation features.
    Kcorr(Kcorr),
    /// 4-qubit runs under several device sets and fixed observables.
    Robustness(Robustness),
    /// Search for a biseparable decomposition of a qutrit-family state.
    BisepSearch(BisepSearch),
    /// Check a run manifest against the files it lists.
    VerifyManifest(VerifyManifest),
}

#[derive(Args, Debug)]
pub struct GenDevices {
    /// Local dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Devices per party.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Case {
    #[value(name = "3q")]
    ThreeQubit,
    #[value(name = "4q")]
    FourQubit,
    #[value(name = "3qudit")]
    ThreeQudit,
    #[value(name = "5part")]
    FivePartite,
    RandomTest,
}

#[derive(Args, Debug)]
pub struct GenDataset {
    #[arg(long, value_enum)]
    pub case: Case,
    /// Party count of the random test set (3, 4 or 5).
    #[arg(long, default_value_t = 3)]
    pub parties: usize,
    #[arg(long)]
    pub devices: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows re-labeled from scratch after building.
    #[arg(long, default_value_t = 0.01)]
    pub audit: f64,
    /// Dataset manifest path; raw features go to a sibling `.f32` file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Train {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Network configuration JSON; defaults to the preset for the dataset shape.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Model file path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Eval {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Optional JSON summary path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// Parameter is the white-noise weight.
    Noise,
    /// Parameter is the weight of the pure state.
    State,
}

#[derive(Args, Debug)]
pub struct Scan {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub devices: PathBuf,
    /// ghz3, w3, ghz4, w4, cl4, d24, ghz5 or ghz43 (case-insensitive).
    #[arg(long)]
    pub family: String,
    /// Defaults to the family's usual convention.
    #[arg(long, value_enum)]
    pub convention: Option<Convention>,
    #[arg(long, default_value_t = 0.001)]
    pub step: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AlphaBeta {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub devices: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Graph {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 600)]
    pub train: usize,
    #[arg(long, default_value_t = 200)]
    pub test: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Kcorr {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.001)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Robustness {
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Device seeds; defaults to five seeds derived from `--seed`.
    #[arg(long, value_delimiter = ',')]
    pub device_seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.001)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BisepSearch {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Ascent restarts per cut.
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    /// Frank-Wolfe iterations.
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Distance below which a decomposition counts as found.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the result and certificate.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyManifest {
    pub manifest: PathBuf,
}

/// Appends `--key value` for every run-config entry whose flag is absent.
fn merge_run_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--run-config");
    let Some(path) = pos.and_then(|i| args.get(i + 1)) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(Failure::Usage, format!("run config {}: {e}", path.to_string_lossy())))?;
    let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| CliError::new(Failure::Usage, format!("run config must be a JSON object: {e}")))?;
    let mut out = args.clone();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if args.iter().any(|a| a == flag.as_str() || a.to_string_lossy().starts_with(&format!("{flag}="))) {
            continue;
        }
        let text = match &value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|v| v.as_str().map(String::from).unwrap_or_else(|| v.to_string()))
                .collect::<Vec<_>>()
                .join(","),
            serde_json::Value::Number(_) | serde_json::Value::Bool(_) => value.to_string(),
            _ => return Err(CliError::new(Failure::Usage, format!("run config key {key}: unsupported value {value}"))),
        };
        out.push(flag.into());
        out.push(text.into());
    }
    Ok(out)
}

fn run() -> CliResult<()> {
    let args = merge_run_config(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            e.print().ok();
            // help and version requests exit 0
            if code == 0 {
                return Ok(());
            }
            return Err(CliError::new(Failure::Usage, "invalid arguments"));
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::new(Failure::Usage, "--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
    }
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.kind != Failure::Usage || !e.error.to_string().starts_with("invalid arguments") {
                eprintln!("error: {:#}", e.error);
            }
            ExitCode::from(e.kind as u8)
        }
    }
}
