use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hintgate_core::config::PipelineConfig;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "hintgate",
    version,
    about = "Generate hints for buggy programs and release only those that help simulated students"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline over a corpus and write per-program results.
    #[command(after_help = config_fields_help())]
    Run(RunArgs),
    /// Run the pipeline against a session script (or live backends) while
    /// recording every completion into the replay cache.
    #[command(after_help = config_fields_help())]
    RecordFixture(RecordArgs),
    /// Compute precision, coverage and agreement from results and annotations.
    Evaluate(EvaluateArgs),
    /// Print the trial log of a run.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Corpus directory (tasks/, programs/, corpus.meta).
    #[arg(long)]
    pub corpus: PathBuf,
    /// JSON configuration file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Symbolic information given to the tutor: base, io, iofix or full.
    #[arg(long)]
    pub mode: Option<String>,
    /// Maximum number of trials per program (max_trials_k).
    #[arg(long)]
    pub trials: Option<u32>,
    /// Samples per stage (n_samples).
    #[arg(long)]
    pub samples: Option<u32>,
    /// Absolute threshold (alpha), decimal or fraction.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Margin over the unaided student (beta), decimal or fraction.
    #[arg(long)]
    pub beta: Option<String>,
    /// Acceptance rule (rule_variant): full, absolute_only, no_beta, relative_only.
    #[arg(long)]
    pub rule: Option<String>,
    /// Feedback shown to the student (validation_payload): explanation or hint.
    #[arg(long)]
    pub payload: Option<String>,
    /// Tutor backend: replay:<model>@<dir> or http:<model>@<url>[#TOKEN_ENV].
    #[arg(long)]
    pub tutor_backend: Option<String>,
    /// Student backend, same syntax as --tutor-backend.
    #[arg(long)]
    pub student_backend: Option<String>,
    /// Master seed for request sub-seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Temperature for explanation/hint generation (gen_temperature).
    #[arg(long)]
    pub gen_temperature: Option<f64>,
    /// Temperature for repair sampling (sample_temperature).
    #[arg(long)]
    pub sample_temperature: Option<f64>,
    /// Wall-clock limit per test case in seconds (limits.wall_time_per_test).
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Address-space cap per program run in bytes, 0 for none (limits.memory_cap).
    #[arg(long)]
    pub memory_cap: Option<u64>,
    /// Replay cache directory. Replaces the directory of replay backends and
    /// receives completions from live ones. Defaults to $HINTGATE_CACHE_DIR.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for programs and test cases.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Any configuration field, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    /// Flag values as (config field, value) pairs, in application order.
    pub fn flag_overrides(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("mode", self.mode.clone());
        push("max_trials_k", self.trials.map(|v| v.to_string()));
        push("n_samples", self.samples.map(|v| v.to_string()));
        push("alpha", self.alpha.clone());
        push("beta", self.beta.clone());
        push("rule_variant", self.rule.clone());
        push("validation_payload", self.payload.clone());
        push("tutor_backend", self.tutor_backend.clone());
        push("student_backend", self.student_backend.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push(
            "gen_temperature",
            self.gen_temperature.map(|v| v.to_string()),
        );
        push(
            "sample_temperature",
            self.sample_temperature.map(|v| v.to_string()),
        );
        push(
            "limits.wall_time_per_test",
            self.timeout_secs.map(|v| v.to_string()),
        );
        push("limits.memory_cap", self.memory_cap.map(|v| v.to_string()));
        out
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory for results/, report.json and run_timing.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing run in --out.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct RecordArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Session script to serve completions from instead of live backends.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Also write the run's results here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing run in --out.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Run directory (or its results/ subdirectory).
    #[arg(long)]
    pub results: PathBuf,
    /// Annotation files, one JSON record per line.
    #[arg(long = "annotations", required = true, num_args = 1..)]
    pub annotations: Vec<PathBuf>,
    /// Write the metric report as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directory (or its results/ subdirectory).
    #[arg(long)]
    pub results: PathBuf,
}

fn config_fields_help() -> String {
    format!(
        "Configuration fields (for --config files and --set): {}",
        PipelineConfig::field_names().join(", ")
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::RecordFixture(args) => commands::record(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Report(args) => commands::report(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hintgate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
