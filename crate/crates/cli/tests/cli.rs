use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use autog_core::planner::{write_transcript, Role, TranscriptEntry};
use autog_core::schema::{parse_schema, validate_schema};
use serde_json::Value;

const CORE_FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn autog(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autog")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    ok(&autog(&["synth", "--seed", seed, "--out", "bench"], dir));
    dir.join("bench")
}

/// A transcript whose first turn selects `actions` and whose second stops.
fn transcript_selecting(actions: &Value, path: &Path) {
    let selection = format!("<selection>{}</selection>", serde_json::to_string_pretty(actions).unwrap());
    let entry = |turn, content: &str| TranscriptEntry { turn, role: Role::Assistant, content: content.into() };
    let entries = vec![entry(0, &selection), entry(0, &selection), entry(1, "<selection>None</selection>")];
    write_transcript(path, &entries).unwrap();
}

fn key_actions(bench: &Path) -> Value {
    let key = json(bench.join("answer_key.json"));
    key["actions"].as_array().unwrap().iter().map(|k| k["action"].clone()).collect()
}

#[test]
fn answer_key_applies_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bench = synth(dir.path(), "4");
    for f in ["schema.yaml", "tasks.json", "answer_key.json", "harmful.json", "spec.json", "manifest.json"] {
        assert!(bench.join(f).exists(), "{f}");
    }
    ok(&autog(&["apply", "bench/schema.yaml", "bench/answer_key.json", "--out", "fixed"], dir.path()));
    let schema = parse_schema(&read(dir.path().join("fixed/schema.yaml"))).unwrap();
    assert_eq!(validate_schema(&schema), vec![]);
    for t in &schema.tables {
        assert!(dir.path().join("fixed").join(&t.source).exists(), "{}", t.source);
    }
    let manifest = json(dir.path().join("fixed/manifest.json"));
    assert_eq!(manifest["command"], "apply");
    assert!(manifest["outputs"]["schema.yaml"].as_str().unwrap().len() == 64);
    assert!(manifest["inputs"].as_object().unwrap().keys().any(|k| k.ends_with("answer_key.json")));
}

#[test]
fn replayed_plan_matches_applied_script() {
    let dir = tempfile::tempdir().unwrap();
    let f = format!("{CORE_FIXTURES}/cot_paper_journal");
    let schema = format!("{f}/schema.yaml");
    ok(&autog(&["plan", "--schema", &schema, "--replay", &format!("{f}/transcript.jsonl"), "--out", "plan"], dir.path()));
    ok(&autog(&["apply", &schema, &format!("{f}/script.json"), "--out", "applied"], dir.path()));
    let planned = read(dir.path().join("plan/schema.yaml"));
    assert_eq!(planned, read(dir.path().join("applied/schema.yaml")));
    assert_eq!(planned, read(format!("{f}/expected/final_schema.yaml")));
    let session = json(dir.path().join("plan/session.json"));
    assert_eq!(session["applied"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("plan/transcript.jsonl").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = autog(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = autog(&["profile", "--budget", "1.5", "--schema", "x.yaml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = autog(&["profile"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(autog(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(autog(&["--version"], dir.path()).status.code(), Some(0));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn failed_command_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let bad = r#"[{"action": "connect_two_columns", "parameters": {"table_1_name": "Writes", "table_1_col_name": "nope", "table_2_name": "Author", "table_2_col_name": "AuthorID"}}]"#;
    std::fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = autog(&["apply", "bench/schema.yaml", "bad.json", "--out", "fixed"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: "));
    assert!(!dir.path().join("fixed").exists());

    // An existing output directory keeps its contents and gains nothing.
    std::fs::create_dir(dir.path().join("kept")).unwrap();
    std::fs::write(dir.path().join("kept/old.txt"), "x").unwrap();
    let out = autog(&["apply", "bench/schema.yaml", "bad.json", "--out", "kept"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let left: Vec<_> = std::fs::read_dir(dir.path().join("kept")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["old.txt"]);
}

#[test]
fn profile_similarity_and_graph_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    ok(&autog(&["profile", "--schema", "bench/schema.yaml", "--out", "p"], dir.path()));
    assert!(read(dir.path().join("p/stats.txt")).starts_with("Analysis for Table Paper:"));
    assert!(json(dir.path().join("p/profiles.json")).get("Paper.Year").is_some());
    ok(&autog(&["infer-types", "--schema", "bench/schema.yaml", "--out", "t"], dir.path()));
    assert_eq!(json(dir.path().join("t/types.json"))["source"], "rules");
    ok(&autog(&["similarity", "--schema", "bench/schema.yaml", "--method", "overlap", "--out", "s"], dir.path()));
    assert!(read(dir.path().join("s/similarity.txt")).starts_with("The pair with the 1st highest similarity"));
    ok(&autog(&["apply", "bench/schema.yaml", "bench/answer_key.json", "--out", "fixed"], dir.path()));
    ok(&autog(&["build-graph", "--schema", "fixed/schema.yaml", "--out", "g"], dir.path()));
    for mode in ["row2node", "row2node_edge"] {
        let summary = read(dir.path().join(format!("g/graph/{mode}/summary.txt")));
        assert!(summary.contains("node Paper: 300 nodes"), "{summary}");
    }
}

#[test]
fn evaluate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5");
    ok(&autog(&["apply", "bench/schema.yaml", "bench/answer_key.json", "--out", "fixed"], dir.path()));
    let args = ["evaluate", "--schema", "bench/schema.yaml", "--schema", "fixed/schema.yaml", "--task", "bench/tasks.json", "--task-name", "field"];
    ok(&autog(&[&args[..], &["--out", "e1"]].concat(), dir.path()));
    ok(&autog(&[&args[..], &["--out", "e2", "--budget", "0.5"]].concat(), dir.path()));
    let ranking = json(dir.path().join("e1/ranking.json"));
    assert_eq!(ranking["ranking"][0], "fixed/schema.yaml");
    ok(&autog(&["compare", "e1/ranking.json", "e2/ranking.json", "--out", "c"], dir.path()));
    assert_eq!(json(dir.path().join("c/compare.json"))["kendall_tau_distance"], 0.0);
}

fn run_pipeline(dir: &Path, out: &str) -> Output {
    autog(
        &["run", "--schema", "bench/schema.yaml", "--task", "bench/tasks.json", "--replay", "key.jsonl", "--runs", "2", "--out", out],
        dir,
    )
}

#[test]
fn run_is_deterministic_and_picks_the_repair() {
    let dir = tempfile::tempdir().unwrap();
    let bench = synth(dir.path(), "6");
    transcript_selecting(&key_actions(&bench), &dir.path().join("key.jsonl"));
    ok(&run_pipeline(dir.path(), "r1"));
    ok(&run_pipeline(dir.path(), "r2"));
    let a = read(dir.path().join("r1/summary.json"));
    assert_eq!(a, read(dir.path().join("r2/summary.json")));
    let summary: Value = serde_json::from_str(&a).unwrap();
    assert!(summary["stages"].as_array().unwrap().iter().all(|s| s["status"] == "ok"), "{summary}");
    assert_ne!(summary["winner"], "original");
    assert_eq!(summary["ranking"].as_array().unwrap().len(), 3);
    assert_eq!(summary["actions"].as_array().unwrap().len(), 4);
    let schema = parse_schema(&read(dir.path().join("r1/final/schema.yaml"))).unwrap();
    assert!(schema.table("PaperKeyword").is_some());
    assert_eq!(read(dir.path().join("r1/final/schema.yaml")), read(dir.path().join("r2/final/schema.yaml")));
}

#[test]
fn run_records_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "7");
    let out = autog(&["run", "--schema", "bench/schema.yaml", "--task", "bench/tasks.json", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let summary = json(dir.path().join("r/summary.json"));
    let status: Vec<(&str, &str)> = summary["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["stage"].as_str().unwrap(), s["status"].as_str().unwrap()))
        .collect();
    assert_eq!(
        status,
        [("load", "ok"), ("profile", "ok"), ("infer", "ok"), ("similarity", "ok"), ("plan", "failed"), ("evaluate", "skipped"), ("rank", "skipped")]
    );
    assert!(!dir.path().join("r/stats.txt").exists());
}
