//! Command-line front end. [`run`] does everything except touching the
//! process streams, so tests can drive it in-process.

pub mod commands;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use scenario::{scenario_digest, Scenario, ValidationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NO_ARBITRAGE: i32 = 3;

pub const THREADS_ENV: &str = "COALITION_FORGE_THREADS";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_RESOLUTION: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "coalition-forge", version, about = "Scoring rules, wagering mechanisms, and coalition arbitrage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Payment table for the players' reports.
    Score {
        #[command(flatten)]
        common: Common,
        /// Only this outcome (1-based).
        #[arg(long, value_name = "J")]
        outcome: Option<usize>,
    },
    /// Identical coalition report, its surplus, and the dominance verdict.
    Arbitrage {
        #[command(flatten)]
        common: Common,
    },
    /// Properness, dominance, and mechanism checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Grid resolution for the properness search.
        #[arg(long, value_name = "N", default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Run the scenario's simulation block.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replaces the scenario seed.
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
    },
}

/// A command result before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub code: i32,
    pub command: &'static str,
    pub payload: serde_json::Value,
    /// Text for csv/table output; `None` means emit the JSON envelope.
    pub body: Option<String>,
    pub stderr: String,
    /// Simulation CSV, written to `--out` whatever the display format.
    pub csv: Option<String>,
}

impl Rendered {
    pub fn new<T: Serialize>(
        code: i32,
        command: &'static str,
        payload: &T,
        body: Option<String>,
        stderr: String,
    ) -> Self {
        Rendered {
            code,
            command,
            payload: serde_json::to_value(payload).expect("payloads serialize"),
            body,
            stderr,
            csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultEnvelope {
    pub scenario_digest: String,
    pub tool_version: String,
    pub command: String,
    pub payload: serde_json::Value,
    pub timestamp: String,
}

impl ResultEnvelope {
    pub fn new(digest: String, command: &str, payload: serde_json::Value) -> Self {
        ResultEnvelope {
            scenario_digest: digest,
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            payload,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("envelope serializes");
        s.push('\n');
        s
    }
}

/// What the process should print and return.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn failure(code: i32, stderr: String) -> Self {
        Output {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

fn validation(e: ValidationError) -> Output {
    Output::failure(EXIT_VALIDATION, format!("error: {e}\n"))
}

/// Path of the JSON sidecar written next to a simulation CSV.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Sizes the global worker pool from `COALITION_FORGE_THREADS`, if set.
pub fn configure_threads(value: Option<&str>) -> Result<(), ValidationError> {
    let Some(raw) = value else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| ValidationError::new(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    // The pool can only be built once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Output::failure(EXIT_VALIDATION, text)
            } else {
                Output {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    if let Err(e) = configure_threads(std::env::var(THREADS_ENV).ok().as_deref()) {
        return validation(e);
    }
    execute(cli.command)
}

fn execute(command: Command) -> Output {
    let common = match &command {
        Command::Score { common, .. }
        | Command::Arbitrage { common }
        | Command::Verify { common, .. }
        | Command::Simulate { common, .. } => common,
    };
    let text = match std::fs::read_to_string(&common.scenario) {
        Ok(t) => t,
        Err(e) => {
            return validation(ValidationError::new(
                "--scenario",
                format!("cannot read {}: {e}", common.scenario.display()),
            ))
        }
    };
    let digest = match scenario_digest(&text) {
        Ok(d) => d,
        Err(e) => return validation(e),
    };
    let model = match Scenario::from_json(&text).and_then(|s| s.validate()) {
        Ok(m) => m,
        Err(e) => return validation(e),
    };
    let scenario_id = common
        .scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let result = match &command {
        Command::Score { common, outcome } => {
            commands::cmd_score(&model, *outcome, common.format.unwrap_or(Format::Table))
        }
        Command::Arbitrage { common } => commands::cmd_arbitrage(&model, common.format.unwrap_or(Format::Table)),
        Command::Verify { common, resolution } => {
            commands::cmd_verify(&model, *resolution, common.format.unwrap_or(Format::Table))
        }
        Command::Simulate { common, seed } => {
            commands::cmd_simulate(&model, *seed, &scenario_id, common.format.unwrap_or(Format::Csv))
        }
    };
    let rendered = match result {
        Ok(r) => r,
        Err(e) => return validation(e),
    };
    emit(rendered, digest, common.out.as_deref())
}

fn emit(rendered: Rendered, digest: String, out: Option<&Path>) -> Output {
    let envelope = ResultEnvelope::new(digest, rendered.command, rendered.payload);
    let text = rendered.body.unwrap_or_else(|| envelope.to_json());
    let mut stderr = rendered.stderr;
    let stdout = match out {
        None => text,
        Some(path) => {
            let written = match &rendered.csv {
                Some(csv) => {
                    let sidecar = sidecar_path(path);
                    std::fs::write(path, csv)
                        .and_then(|_| std::fs::write(&sidecar, envelope.to_json()))
                        .map(|_| format!("wrote {} and {}\n", path.display(), sidecar.display()))
                }
                None => std::fs::write(path, &text).map(|_| format!("wrote {}\n", path.display())),
            };
            match written {
                Ok(note) => stderr.push_str(&note),
                Err(e) => {
                    return validation(ValidationError::new(
                        "--out",
                        format!("cannot write {}: {e}", path.display()),
                    ))
                }
            }
            String::new()
        }
    };
    Output {
        code: rendered.code,
        stdout,
        stderr,
    }
}
