//! Subcommand implementations behind the `pairllc` binary.
//!
//! Each `cmd_*` takes a fully resolved [`RunConfig`] and writes its
//! artifacts under `output.dir` (default: the working directory). The
//! binary only parses flags, applies them with [`load_config`] and maps
//! [`CliError`] to an exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pairllc::cache::parse_event_line;
use pairllc::config::ConfigError;
use pairllc::metrics::offline::{analyze_events, analyze_trace, Analysis, AnalysisKind};
use pairllc::sim::{simulate_with, SimError, SimOptions};
use pairllc::trace::{write_trace, TraceError};
use pairllc::{RunConfig, SimReport};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub mod sweep;

pub use sweep::{cmd_sweep, SweepAxis, SweepRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(format!("trace: {e}")),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => CliError::Config(e.to_string()),
            SimError::Invariant(_) => CliError::Invariant(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Emit {
    #[default]
    Json,
    Csv,
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Emit::Json),
            "csv" => Ok(Emit::Csv),
            _ => Err(format!("unknown emit format `{s}`; expected json | csv")),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dump_pairtable: bool,
    pub dump_events: bool,
}

/// Reads `path` (or starts from defaults) and applies `ov`.
pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = &ov.trace {
        cfg.trace = Some(t.clone());
    }
    if let Some(d) = &ov.out {
        cfg.output.dir = Some(d.clone());
    }
    if ov.seed.is_some() {
        cfg.rng_seed = ov.seed;
    }
    cfg.metrics.events |= ov.dump_events;
    cfg.metrics.pair_table |= ov.dump_pairtable;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct TraceManifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub pattern: pairllc::config::Pattern,
    pub generator: pairllc::TraceGenConfig,
    pub records: u64,
    pub sha256: String,
}

pub fn manifest_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Generates the configured trace. The destination is `trace` if set,
/// otherwise `<out>/trace.pllc`; a `.txt` extension selects the text form.
pub fn cmd_gen(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let block = cfg
        .generator
        .as_ref()
        .ok_or_else(|| CliError::Config("gen needs a `generator` block in the config".into()))?;
    let gen = block.resolve(cfg.rng_seed)?;
    let trace = block.pattern.generate(&gen)?;
    let path = match &cfg.trace {
        Some(p) => p.clone(),
        None => out_dir(cfg)?.join("trace.pllc"),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_trace(&path, &trace)?;
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    let gen_json = serde_json::to_vec(&(block.pattern, &gen)).expect("generator config serializes");
    let manifest = TraceManifest {
        schema_version: pairllc::config::CONFIG_SCHEMA_VERSION,
        config_digest: sha256_hex(&gen_json),
        pattern: block.pattern,
        generator: gen,
        records: trace.len() as u64,
        sha256: sha256_hex(&bytes),
    };
    let mpath = manifest_path(&path);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&mpath, text.as_bytes())?;
    Ok(vec![path, mpath])
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: SimReport,
    pub files: Vec<PathBuf>,
}

pub fn render_report(report: &SimReport, emit: Emit) -> String {
    match emit {
        Emit::Json => report.to_json(),
        Emit::Csv => format!("{}\n{}\n", SimReport::csv_header(), report.csv_row()),
    }
}

fn with_digest_header(digest: &str, body: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("# config_digest {digest}\n");
    for line in body {
        s.push_str(&line);
        s.push('\n');
    }
    s
}

/// One simulation. Writes `report.json` or `report.csv`, plus `events.txt`
/// and `pairtable.txt` when requested.
pub fn cmd_run(cfg: &RunConfig, emit: Emit) -> Result<RunOutput, CliError> {
    let trace = cfg.load_trace()?;
    let sim = cfg.sim_config();
    let opts = SimOptions { record_events: cfg.metrics.events, dump_pair_table: cfg.metrics.pair_table };
    let run = simulate_with(&trace, &sim, opts)?;
    let dir = out_dir(cfg)?;
    let digest = &run.report.config_digest;
    let mut files = Vec::new();

    let report_path = dir.join(match emit {
        Emit::Json => "report.json",
        Emit::Csv => "report.csv",
    });
    write_file(&report_path, render_report(&run.report, emit).as_bytes())?;
    files.push(report_path);

    if let Some(events) = &run.events {
        let p = dir.join("events.txt");
        write_file(&p, with_digest_header(digest, events.iter().map(|e| e.to_line())).as_bytes())?;
        files.push(p);
    }
    if cfg.metrics.pair_table {
        let body = run.pair_table.as_deref().unwrap_or("# layer disabled\n");
        let p = dir.join("pairtable.txt");
        write_file(&p, format!("# config_digest {digest}\n{body}").as_bytes())?;
        files.push(p);
    }
    Ok(RunOutput { report: run.report, files })
}

pub fn parse_analyses(names: &[String]) -> Result<Vec<AnalysisKind>, CliError> {
    if names.is_empty() {
        return Ok(AnalysisKind::ALL.to_vec());
    }
    let mut kinds = names.iter().map(|n| n.parse().map_err(CliError::Config)).collect::<Result<Vec<_>, _>>()?;
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

/// Reads an `events.txt` written by `run`. Returns the embedded digest.
pub fn read_event_log(path: &Path) -> Result<(String, Vec<pairllc::cache::Event>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut digest = String::new();
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(d) = rest.trim().strip_prefix("config_digest ") {
                digest = d.trim().to_string();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let e = parse_event_line(line).map_err(|m| CliError::Io(format!("{}:{}: {m}", path.display(), i + 1)))?;
        events.push(e);
    }
    Ok((digest, events))
}

/// Offline analyses of the configured trace, or of an event log when
/// `events` is given (its LLC geometry is taken from `cfg`). Writes
/// `analysis.json`.
pub fn cmd_analyze(
    cfg: &RunConfig,
    events: Option<&Path>,
    kinds: &[AnalysisKind],
) -> Result<(Analysis, PathBuf), CliError> {
    let analysis = match events {
        Some(p) => {
            let (digest, evs) = read_event_log(p)?;
            let geom = cfg.hierarchy.llc_geometry().map_err(|e| CliError::Config(format!("hierarchy.llc: {e}")))?;
            analyze_events(&evs, geom, &digest, kinds)
        }
        None => analyze_trace(&cfg.load_trace()?, &cfg.sim_config(), kinds)?,
    };
    let path = out_dir(cfg)?.join("analysis.json");
    write_file(&path, analysis.to_json().as_bytes())?;
    Ok((analysis, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let cfg: CliError = ConfigError::Invalid("x".into()).into();
        assert_eq!(cfg.exit_code(), 1);
        let io: CliError = TraceError::Truncated { offset: 3 }.into();
        assert_eq!(io.exit_code(), 2);
        let inv: CliError = SimError::Invariant("x".into()).into();
        assert_eq!(inv.exit_code(), 3);
        let gen: CliError = TraceError::Config("x".into()).into();
        assert_eq!(gen.exit_code(), 1);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"trace": "a.pllc", "rng_seed": 1}"#).unwrap();
        let ov = Overrides { trace: Some("b.pllc".into()), seed: Some(9), dump_events: true, ..Overrides::default() };
        let cfg = load_config(Some(&p), &ov).unwrap();
        assert_eq!(cfg.trace.as_deref(), Some(Path::new("b.pllc")));
        assert_eq!(cfg.rng_seed, Some(9));
        assert!(cfg.metrics.events && !cfg.metrics.pair_table);
    }

    #[test]
    fn manifest_sits_next_to_trace() {
        assert_eq!(manifest_path(Path::new("x/t.pllc")), PathBuf::from("x/t.pllc.manifest.json"));
    }

    #[test]
    fn analyses_default_to_all_and_reject_unknown() {
        assert_eq!(parse_analyses(&[]).unwrap(), AnalysisKind::ALL.to_vec());
        let two = parse_analyses(&["stall".into(), "reuse".into(), "stall".into()]).unwrap();
        assert_eq!(two, vec![AnalysisKind::Reuse, AnalysisKind::Stall]);
        assert_eq!(parse_analyses(&["x".into()]).unwrap_err().exit_code(), 1);
    }
}
