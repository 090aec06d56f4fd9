//! Host command line. Every command prints canonical JSON on stdout and
//! exits nonzero on error.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use collvote_core::canonical;
use collvote_core::crypto::SecretIdentifier;
use collvote_core::ledger::{EligibilitySet, LedgerError, SessionConfig};
use collvote_core::sim::{self, ScenarioConfig, SimError, SweepGrid};
use collvote_core::tally::{tally_ledger, verify_transcript, TallyError, TallyTranscript};

use crate::board::{read_log, Board};
use crate::clock::{Clock, ManualClock, WallClock};
use crate::Gateway;

pub const LOG_ENV: &str = "COLLVOTE_LOG";

#[derive(Debug, Parser)]
#[command(name = "collvote", version, about = "Host tooling for collectively secured voting sessions")]
pub struct Cli {
    /// Event log file.
    #[arg(long, global = true, env = LOG_ENV)]
    pub log: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate secret identifiers and the public eligibility set.
    Issue {
        #[arg(long)]
        count: usize,
        /// Receives identifiers.json (host only) and eligibility.json (public).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Start a session on an empty log.
    CreateSession {
        #[arg(long)]
        config: PathBuf,
        /// Eligibility set; may instead be embedded in the config as `eligibility`.
        #[arg(long)]
        eligibility: Option<PathBuf>,
    },
    /// Fix the holder set and resolve the threshold.
    Freeze {
        #[arg(long)]
        now: Option<u64>,
    },
    /// Pay out deposits and rewards after the release deadline.
    Settle {
        #[arg(long)]
        now: Option<u64>,
    },
    /// Tally the session and print the transcript.
    Tally {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive a transcript from the log.
    Verify {
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Run one seeded election scenario.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Calibrate the intercept to this expected opt-in rate first.
        #[arg(long)]
        calibrate: Option<f64>,
    },
    /// Threshold-success rates over a deposit/reward/phi grid, as CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the /v1 HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Pin the logical clock instead of following the config's wall-clock mapping.
        #[arg(long)]
        tick: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    fn new(code: impl Into<String>, message: impl ToString) -> Self {
        CliError { code: code.into(), message: message.to_string() }
    }

    fn io(path: &Path, e: impl ToString) -> Self {
        CliError::new("Io", format!("{}: {}", path.display(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(&json!({ "error": { "code": self.code, "message": self.message } }))
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        CliError::new(e.code(), e)
    }
}

impl From<TallyError> for CliError {
    fn from(e: TallyError) -> Self {
        CliError::new(e.code(), e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::new("SimError", e)
    }
}

/// Printed output and exit status of one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

impl Outcome {
    fn ok(value: &impl Serialize) -> Self {
        Outcome { stdout: canonical::to_string(value), success: true }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::new("ParseError", format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn log_path(log: &Option<PathBuf>) -> Result<&Path, CliError> {
    log.as_deref()
        .ok_or_else(|| CliError::new("Usage", format!("no event log: pass --log or set {LOG_ENV}")))
}

fn resolve_tick(now: Option<u64>, config: &SessionConfig) -> Result<u64, CliError> {
    match (now, config.clock) {
        (Some(t), _) => Ok(t),
        (None, Some(mapping)) => Ok(WallClock(mapping).now()),
        (None, None) => Err(CliError::new("Usage", "pass --now; the session has no clock mapping")),
    }
}

/// Runs a non-serving command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Issue { count, out_dir } => issue(*count, out_dir),
        Command::CreateSession { config, eligibility } => {
            create_session(log_path(&cli.log)?, config, eligibility.as_deref())
        }
        Command::Freeze { now } => {
            let mut ledger = Board::file_ledger(log_path(&cli.log)?)?;
            let tick = resolve_tick(*now, &ledger.state()?.config)?;
            let (n, t) = ledger.freeze_holder_set(tick)?;
            Ok(Outcome::ok(&json!({ "n": n, "t": t, "chain_head": ledger.head() })))
        }
        Command::Settle { now } => {
            let mut ledger = Board::file_ledger(log_path(&cli.log)?)?;
            let tick = resolve_tick(*now, &ledger.state()?.config)?;
            let settlement = ledger.settle_incentives(tick)?;
            Ok(Outcome::ok(&json!({ "settlement": settlement, "chain_head": ledger.head() })))
        }
        Command::Tally { out } => {
            let log = read_log(log_path(&cli.log)?)?;
            let ledger = collvote_core::ledger::Ledger::replay(&log)?;
            let transcript = tally_ledger(&ledger)?;
            let text = transcript.to_canonical_json();
            if let Some(path) = out {
                write_text(path, &text)?;
            }
            Ok(Outcome { stdout: text, success: true })
        }
        Command::Verify { transcript } => {
            let log = read_log(log_path(&cli.log)?)?;
            let text = fs::read_to_string(transcript).map_err(|e| CliError::io(transcript, e))?;
            let report = match TallyTranscript::from_json(&text) {
                Ok(t) => verify_transcript(&t, &log),
                Err(e) => {
                    return Err(CliError::new("ParseError", format!("transcript: {e}")));
                }
            };
            Ok(Outcome { stdout: canonical::to_string(&report), success: report.ok })
        }
        Command::Simulate { config, seed, out, calibrate } => {
            let mut scenario: ScenarioConfig = match config {
                Some(path) => read_json(path)?,
                None => ScenarioConfig::default(),
            };
            if let Some(rate) = calibrate {
                scenario.calibrate_intercept(*rate)?;
            }
            let report = sim::run_scenario(&scenario, *seed)?;
            let text = canonical::to_string(&report);
            if let Some(path) = out {
                write_text(path, &text)?;
            }
            Ok(Outcome { stdout: text, success: true })
        }
        Command::Sweep { config, grid, seed, out } => {
            let scenario: ScenarioConfig = match config {
                Some(path) => read_json(path)?,
                None => ScenarioConfig::default(),
            };
            let grid: SweepGrid = read_json(grid)?;
            let cells = sim::sweep(&scenario, &grid, *seed)?;
            let file = fs::File::create(out).map_err(|e| CliError::io(out, e))?;
            sim::write_csv(&cells, file)?;
            Ok(Outcome::ok(&json!({ "cells": cells, "csv": out })))
        }
        Command::Serve { .. } => Err(CliError::new("Usage", "serve runs through `serve`")),
    }
}

fn issue(count: usize, out_dir: &Path) -> Result<Outcome, CliError> {
    if count < 1 {
        return Err(CliError::new("Usage", "count must be >= 1"));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let (identifiers, set) = sim::issue_identifiers(count, &mut rand::rngs::OsRng);
    let ids: Vec<SecretIdentifier> = identifiers;
    let id_path = out_dir.join("identifiers.json");
    let set_path = out_dir.join("eligibility.json");
    write_text(&id_path, &canonical::to_string(&ids))?;
    write_text(&set_path, &canonical::to_string(&set))?;
    Ok(Outcome::ok(&json!({
        "count": count,
        "identifiers": id_path,
        "eligibility": set_path,
    })))
}

fn create_session(log: &Path, config: &Path, eligibility: Option<&Path>) -> Result<Outcome, CliError> {
    let mut raw: Value = read_json(config)?;
    let embedded = raw.as_object_mut().and_then(|m| m.remove("eligibility"));
    let set: EligibilitySet = match (eligibility, embedded) {
        (Some(path), _) => read_json(path)?,
        (None, Some(v)) => serde_json::from_value(v)
            .map_err(|e| CliError::new("ParseError", format!("eligibility: {e}")))?,
        (None, None) => return Err(CliError::new("Usage", "no eligibility set: pass --eligibility")),
    };
    let config: SessionConfig = serde_json::from_value(raw)
        .map_err(|e| CliError::new("ParseError", format!("{}: {e}", config.display())))?;
    let mut ledger = Board::file_ledger(log)?;
    ledger.open_session(config, set)?;
    let state = ledger.state()?;
    Ok(Outcome::ok(&json!({
        "session_id": state.config.session_id,
        "eligible": state.eligibility.len(),
        "chain_head": ledger.head(),
    })))
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(log: &Path, addr: SocketAddr, tick: Option<u64>) -> Result<(), CliError> {
    let ledger = Board::file_ledger(log)?;
    let clock: Arc<dyn Clock> = match (tick, ledger.state()?.config.clock) {
        (Some(t), _) => Arc::new(ManualClock::new(t)),
        (None, Some(mapping)) => Arc::new(WallClock(mapping)),
        (None, None) => {
            return Err(CliError::new("Usage", "pass --tick; the session has no clock mapping"))
        }
    };
    let gateway = Arc::new(Gateway::new(ledger, clock));
    let ticker = gateway.clone();
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(std::time::Duration::from_secs(1));
        loop {
            interval.tick().await;
            // Failures resurface on the next client write.
            let _ = ticker.tick();
        }
    });
    let app = gateway.router();
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new("Io", e))?;
    eprintln!("collvote gateway listening on {addr}");
    axum::serve(listener, app).await.map_err(|e| CliError::new("Io", e))
}
