//! `noise-audit`: generate datasets, learn, test, run tester-learners, and
//! batch experiments.
//!
//! Exit codes: 0 accept (or success), 2 reject, 1 error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] noise_audit::error::Error),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "noise-audit",
    version,
    about = "Testable learning of halfspaces under label noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a labeled dataset and write it as CSV with a provenance sidecar.
    Generate(Flags),
    /// Run a learner on a dataset and print the direction.
    Learn(Flags),
    /// Run one tester against a learned (or given) direction.
    Test(Flags),
    /// Run the full tester-learner on a dataset.
    Pipeline(Flags),
    /// Compute a calibrated threshold.
    Calibrate(Flags),
    /// Run the pipeline over seeds and a parameter grid.
    Experiment(Flags),
}

/// Shared flags. Any flag overrides the same key from `--config`.
#[derive(clap::Args, Debug, Default)]
pub struct Flags {
    /// `key = value` file (`#` comments), or a JSON report to rerun.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub k_dis: Option<String>,
    #[arg(long)]
    pub k_spec: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// paper[:C] | fixed:Δ | calibrated[:trials:quantile[:seed]]
    #[arg(long)]
    pub policy: Option<String>,
    /// clean | rcn:η | strong-rcn-half | massart:constant:η |
    /// massart:margin-band:η:w | massart:margin-sigmoid:η:s
    #[arg(long)]
    pub noise: Option<String>,
    /// gaussian | uniform-cube | student-t:ν | gaussian-mixture:offset
    #[arg(long)]
    pub marginal: Option<String>,
    /// Plant this fraction of near-margin mislabeled points instead.
    #[arg(long)]
    pub rho: Option<String>,
    /// massart | rcn
    #[arg(long)]
    pub pipeline: Option<String>,
    /// chow | sgd
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub min_samples: Option<String>,
    /// Seeds per grid point (experiment).
    #[arg(long)]
    pub trials: Option<String>,
    /// disagreement | spectral (test, calibrate)
    #[arg(long)]
    pub tester: Option<String>,
    /// `U` for the spectral tester.
    #[arg(long)]
    pub normalizer: Option<String>,
    /// Comma-separated direction for `test`; learned when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Experiment axis `key=v1,v2,...`; repeatable.
    #[arg(long)]
    pub grid: Vec<String>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs: [(&'static str, &Option<String>); 18] = [
            ("d", &self.d),
            ("n", &self.n),
            ("eps", &self.eps),
            ("delta", &self.delta),
            ("c", &self.c),
            ("k_dis", &self.k_dis),
            ("k_spec", &self.k_spec),
            ("seed", &self.seed),
            ("policy", &self.policy),
            ("noise", &self.noise),
            ("marginal", &self.marginal),
            ("rho", &self.rho),
            ("pipeline", &self.pipeline),
            ("learner", &self.learner),
            ("min_samples", &self.min_samples),
            ("trials", &self.trials),
            ("tester", &self.tester),
            ("normalizer", &self.normalizer),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NOISE_AUDIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Config(format!("NOISE_AUDIT_THREADS = {raw:?}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<commands::Status, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Generate(f) => commands::generate(&f),
        Command::Learn(f) => commands::learn(&f),
        Command::Test(f) => commands::test(&f),
        Command::Pipeline(f) => commands::pipeline(&f),
        Command::Calibrate(f) => commands::calibrate(&f),
        Command::Experiment(f) => commands::experiment(&f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors share the error exit code; --help and --version succeed
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(commands::Status::Accept) => ExitCode::SUCCESS,
        Ok(commands::Status::Reject) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
