use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pairllc::metrics::offline::AnalysisKind;
use pairllc::{RunConfig, TraceGenConfig};
use pairllc_cli::sweep::{parse_values, run_sweep, sweep_csv, SweepRow};
use pairllc_cli::{cmd_analyze, cmd_gen, cmd_run, cmd_sweep, load_config, Emit, Overrides, SweepAxis};

const TINY: &str = r#"{
  "generator": {
    "pattern": "many_to_few",
    "config": {"n_instr_lines": 512, "n_data_lines": 64, "cores": 2, "steps_per_core": 400, "stream_factor": 2}
  },
  "rng_seed": 3,
  "hierarchy": {"private_capacity": 4096, "private_associativity": 4, "llc_capacity": 16384, "llc_associativity": 8},
  "policy": "lru"
}"#;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairllc")).args(args).current_dir(cwd).output().unwrap()
}

fn tiny(extra: &str) -> RunConfig {
    let mut v: serde_json::Value = serde_json::from_str(TINY).unwrap();
    let extra: serde_json::Value = serde_json::from_str(extra).unwrap();
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    RunConfig::from_json(&v.to_string()).unwrap()
}

fn in_dir(cfg: &RunConfig, dir: &Path) -> RunConfig {
    let mut c = cfg.clone();
    c.output.dir = Some(dir.to_path_buf());
    c
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn lru_on_tiny_trace_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_run(&in_dir(&tiny("{}"), dir.path()), Emit::Json).unwrap();
    let got = fs::read_to_string(&out.files[0]).unwrap();
    let want = fs::read_to_string(golden("lru_tiny.json")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn disabled_layer_reports_like_the_bare_policy() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_run(&in_dir(&tiny("{}"), a.path()), Emit::Json).unwrap();
    cmd_run(&in_dir(&tiny(r#"{"garibaldi": {"enabled": false, "k": 4}}"#), b.path()), Emit::Json).unwrap();
    let read = |d: &Path| fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn unknown_policy_exits_1_and_lists_policies() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"policy": "plru"}"#).unwrap();
    let out = bin(&["run", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lru | drrip | hawkeye | mockingjay | belady"), "{err}");
}

#[test]
fn schema_violation_names_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{\n  \"polcy\": \"lru\"\n}").unwrap();
    let out = bin(&["run", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("polcy") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["run", "--trace", "nope.pllc"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_or_bad_sweep_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), TINY).unwrap();
    for args in [
        &["sweep", "--config", "c.json", "--axis", "k", "--values"][..],
        &["sweep", "--config", "c.json", "--axis", "k", "--values", "1,1"],
        &["sweep", "--config", "c.json", "--axis", "k", "--values", "12"],
        &["sweep", "--config", "c.json", "--axis", "ways", "--values", "1"],
    ] {
        let out = bin(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!dir.path().join("sweep_k.csv").exists());
}

#[test]
fn bin_gen_then_run_matches_run_from_generator() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), TINY).unwrap();
    let out = bin(&["gen", "--config", "c.json", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin(&["run", "--config", "c.json", "--trace", "g/trace.pllc", "--out", "a"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "a/report.json");
    assert!(bin(&["run", "--config", "c.json", "--out", "b"], dir.path()).status.success());
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/report.json"), read("b/report.json"));
}

#[test]
fn gen_manifest_records_digest_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_gen(&in_dir(&tiny("{}"), dir.path())).unwrap();
    let trace = fs::read(&files[0]).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&files[1]).unwrap()).unwrap();
    use sha2::Digest;
    assert_eq!(m["sha256"], hex::encode(sha2::Sha256::digest(&trace)));
    assert_eq!(m["records"], 2 * 400 * 5);
    assert_eq!(m["generator"]["rng_seed"], 3);
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);

    let mut txt = tiny("{}");
    txt.trace = Some(dir.path().join("t.txt"));
    cmd_gen(&txt).unwrap();
    let a = pairllc::trace::read_trace(&files[0]).unwrap();
    assert_eq!(pairllc::trace::read_trace(&dir.path().join("t.txt")).unwrap(), a);
    assert!(dir.path().join("t.txt.manifest.json").exists());
}

#[test]
fn same_run_twice_is_byte_identical() {
    let cfg = tiny(r#"{"garibaldi": {"period_N": 64}}"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ov = Overrides { dump_events: true, dump_pairtable: true, ..Overrides::default() };
    let mut files = Vec::new();
    for d in [a.path(), b.path()] {
        let mut c = in_dir(&cfg, d);
        c.metrics.events = ov.dump_events;
        c.metrics.pair_table = ov.dump_pairtable;
        files.push(cmd_run(&c, Emit::Csv).unwrap().files);
    }
    assert_eq!(files[0].len(), 3);
    let digest = cfg.sim_config().digest();
    for (x, y) in files[0].iter().zip(&files[1]) {
        let (x, y) = (fs::read_to_string(x).unwrap(), fs::read_to_string(y).unwrap());
        assert_eq!(x, y);
        assert!(x.contains(&digest));
    }
}

#[test]
fn event_log_analysis_agrees_with_trace_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = in_dir(&tiny("{}"), dir.path());
    cfg.metrics.events = true;
    let run = cmd_run(&cfg, Emit::Json).unwrap();
    let kinds = AnalysisKind::ALL;
    let (from_events, _) = cmd_analyze(&cfg, Some(&dir.path().join("events.txt")), &kinds).unwrap();
    let (from_trace, path) = cmd_analyze(&cfg, None, &kinds).unwrap();
    assert_eq!(from_events.config_digest, run.report.config_digest);
    assert_eq!(from_events.belady, from_trace.belady);
    assert_eq!(from_events.reuse, from_trace.reuse);
    assert_eq!(from_events.stall.as_ref(), Some(&run.report.stall));
    assert_eq!(from_events.conditional.as_ref(), Some(&run.report.conditional));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(json["belady"]["misses"].as_u64().unwrap() <= run.report.hierarchy.instruction.llc_misses
        + run.report.hierarchy.data.llc_misses);
}

#[test]
fn malformed_event_log_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.txt"), "# config_digest ab\n1 0 Q memory 190 0x1 - -\n").unwrap();
    let out = bin(&["analyze", "--events", "e.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("e.txt:2"));
}

#[test]
fn points_run_alone_equal_the_sweep() {
    let cfg = tiny(r#"{"garibaldi": {"period_N": 64}}"#);
    let trace = cfg.load_trace().unwrap();
    let values = [3, 9, 30];
    let rows = run_sweep(&trace, &cfg, SweepAxis::ThresholdFixed, &values, 3).unwrap();
    for (row, &v) in rows.iter().zip(&values) {
        let alone = run_sweep(&trace, &cfg, SweepAxis::ThresholdFixed, &[v], 1).unwrap();
        assert_eq!(alone[0].csv_row(), row.csv_row());
    }
    let cap = run_sweep(&trace, &cfg, SweepAxis::LlcCapacity, &[8192, 32768], 2).unwrap();
    for row in &cap {
        let alone = run_sweep(&trace, &cfg, SweepAxis::LlcCapacity, &[row.value], 1).unwrap();
        assert_eq!(alone[0].csv_row(), row.csv_row());
    }
    assert_ne!(cap[0].baseline.stall.total_cycles, cap[1].baseline.stall.total_cycles);
}

#[test]
fn thirty_point_sweep_has_thirty_rows_and_stable_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = in_dir(&tiny("{}"), dir.path());
    let values: Vec<String> = (0..30).rev().map(|v| (2 * v).to_string()).collect();
    let (rows, path) = cmd_sweep(&cfg, SweepAxis::ThresholdFixed, &values, 4).unwrap();
    let text = fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 31);
    assert_eq!(lines[0], SweepRow::csv_header());
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
    assert!(rows.windows(2).all(|w| w[0].value < w[1].value));
    let seq = run_sweep(&cfg.load_trace().unwrap(), &cfg, SweepAxis::ThresholdFixed, &parse_values(
        SweepAxis::ThresholdFixed, &values, &cfg.hierarchy).unwrap(), 1).unwrap();
    assert_eq!(sweep_csv(&seq), text);
}

#[test]
fn many_to_few_sweeps_keep_their_direction() {
    let cfg = RunConfig::from_json(r#"{"generator": {"pattern": "many_to_few"}, "rng_seed": 7, "garibaldi": {}}"#)
        .unwrap();
    assert_eq!(cfg.generator.as_ref().unwrap().resolve(cfg.rng_seed).unwrap().steps_per_core,
        TraceGenConfig::many_to_few_default().steps_per_core);
    let trace = cfg.load_trace().unwrap();

    let k = run_sweep(&trace, &cfg, SweepAxis::K, &[0, 1, 2, 8], 4).unwrap();
    assert!(k[1].report.stall.total_cycles <= k[0].report.stall.total_cycles);

    let ways = run_sweep(&trace, &cfg, SweepAxis::LlcAssociativity, &[6, 12, 24, 48], 4).unwrap();
    let gains: Vec<f64> = ways.iter().map(|r| r.stall_reduction().unwrap()).collect();
    assert!(gains.windows(2).all(|w| w[0] <= w[1]), "{gains:?}");
}

#[test]
fn flags_override_config_file_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, TINY).unwrap();
    let ov = Overrides { seed: Some(5), out: Some(dir.path().join("o")), ..Overrides::default() };
    let cfg = load_config(Some(&p), &ov).unwrap();
    assert_eq!(cfg.generator.as_ref().unwrap().resolve(cfg.rng_seed).unwrap().rng_seed, 5);
    cmd_run(&cfg, Emit::Csv).unwrap();
    let csv = fs::read_to_string(dir.path().join("o/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
