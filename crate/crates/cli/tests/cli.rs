use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Registry, Validator};
use serde_json::Value;
use tempfile::TempDir;

const SCHEMAS: [(&str, &str); 7] = [
    ("scene", include_str!("../schemas/scene.schema.json")),
    ("run_config", include_str!("../schemas/run_config.schema.json")),
    ("match_report", include_str!("../schemas/match_report.schema.json")),
    ("report_line", include_str!("../schemas/report_line.schema.json")),
    ("summary", include_str!("../schemas/summary.schema.json")),
    ("compare", include_str!("../schemas/compare.schema.json")),
    ("error", include_str!("../schemas/error.schema.json")),
];

fn validator(name: &str) -> Validator {
    let docs: Vec<(String, Value)> = SCHEMAS
        .iter()
        .map(|(n, s)| (format!("https://a2b.invalid/schemas/{n}.schema.json"), serde_json::from_str(s).unwrap()))
        .collect();
    let registry = Registry::new().extend(docs.iter().map(|(u, v)| (u.as_str(), v))).unwrap().prepare().unwrap();
    let root = &docs.iter().find(|(u, _)| u.ends_with(&format!("/{name}.schema.json"))).unwrap().1;
    jsonschema::options().with_registry(&registry).build(root).unwrap()
}

fn assert_valid(v: &Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

fn a2b(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2b")).args(args).env_remove("A2B_SEED").output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn scenes(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let path = dir.path().join("scenes.jsonl");
    let mut args = vec!["gen", "--seed", "3", "--count", "6", "--out", p(&path)];
    args.extend_from_slice(extra);
    ok(a2b(&args));
    path
}

/// First line of stderr parsed as the error envelope.
fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let doc: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_valid(&validator("error"), &doc);
    doc
}

#[test]
fn generated_scenes_match_schema() {
    let dir = TempDir::new().unwrap();
    let v = validator("scene");
    for kind in ["homography", "affine", "pose"] {
        let path = dir.path().join(format!("{kind}.jsonl"));
        ok(a2b(&["gen", "--seed", "0", "--count", "3", "--kind", kind, "--points", "50", "--out", p(&path)]));
        let recs = lines(&path);
        assert_eq!(recs.len(), 3);
        for (k, r) in recs.iter().enumerate() {
            assert_valid(&v, r);
            assert_eq!(r["seed"], k as u64);
        }
    }
}

#[test]
fn seed_can_come_from_environment() {
    let out = ok(Command::new(env!("CARGO_BIN_EXE_a2b"))
        .args(["gen", "--count", "1"])
        .env("A2B_SEED", "42")
        .output()
        .unwrap());
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["seed"], 42);
}

#[test]
fn run_reports_and_summary_match_schema() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);
    let out_path = dir.path().join("report.jsonl");
    let out = ok(a2b(&["run", "--seed", "1", "--k", "4", "--scenes", p(&s), "--out", p(&out_path)]));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&validator("summary"), &summary);
    assert_eq!(summary["n_scenes"], 6);
    let v = validator("report_line");
    let recs = lines(&out_path);
    assert_eq!(recs.len(), 6);
    for r in &recs {
        assert_valid(&v, r);
        assert_eq!(r["config"]["k"], 4);
        assert_eq!(r["config"]["seed"], 1);
        assert_eq!(r["anchors"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn compare_covers_every_mode_and_matches_schema() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);
    let out = ok(a2b(&["compare", "--seed", "1", "--preset", "benchmark", "--scenes", p(&s)]));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&validator("compare"), &doc);
    let modes: Vec<&str> = doc["summaries"].as_array().unwrap().iter().map(|m| m["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["nn", "descriptor", "cartesian", "a2b"]);
    assert_eq!(doc["scenes"].as_array().unwrap().len(), 6);
}

#[test]
fn compare_without_repeats_is_near_perfect() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &["--n-patterns", "0", "--n-unique", "40"]);
    let out = ok(a2b(&["compare", "--seed", "1", "--scenes", p(&s)]));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    for m in doc["summaries"].as_array().unwrap() {
        if m["mode"] == "cartesian" || m["mode"] == "a2b" {
            assert!(m["precision_proj"].as_f64().unwrap() >= 0.99, "{m}");
        }
    }
}

#[test]
fn sweep_writes_one_row_per_value_and_mode() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);
    let out_path = dir.path().join("sweep.csv");
    ok(a2b(&[
        "sweep",
        "--seed",
        "1",
        "--scenes",
        p(&s),
        "--param",
        "k",
        "--values",
        "3,4,5,6",
        "--modes",
        "a2b,cartesian",
        "--out",
        p(&out_path),
    ]));
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(&header[..4], ["param", "value", "mode", "n_scenes"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!((&rows[0][1], &rows[0][2]), ("3", "a2b"));
    assert_eq!((&rows[7][1], &rows[7][2]), ("6", "cartesian"));
}

#[test]
fn anchor_override_file_is_used() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);
    let anchors = dir.path().join("anchors.jsonl");
    std::fs::write(&anchors, r#"{"seed":3,"anchors":[{"a":[0,0],"b":[1,1],"confidence":1.0}]}"#).unwrap();
    let out = a2b(&[
        "run",
        "--seed",
        "1",
        "--scenes",
        p(&s),
        "--anchors",
        p(&anchors),
        "--out",
        p(&dir.path().join("r.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"]["code"], "encoding.too_few_seeds");
}

#[test]
fn errors_are_machine_readable() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);

    let out = a2b(&["run", "--seed", "1", "--scenes", "/definitely/missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"]["code"], "cli.io_error");

    let out = a2b(&["run", "--seed", "1", "--alpha", "1.5", "--scenes", p(&s)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"]["code"], "cli.config_invalid");

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"seed\": 1}\n").unwrap();
    let out = a2b(&["run", "--seed", "1", "--scenes", p(&bad)]);
    assert_eq!(error_of(&out)["error"]["code"], "cli.parse_error");

    let out = a2b(&["sweep", "--seed", "1", "--scenes", p(&s), "--param", "nope", "--values", "1"]);
    assert_eq!(error_of(&out)["error"]["code"], "cli.config_invalid");

    let out = a2b(&["run", "--scenes", p(&s)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["code"], "cli.usage");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let s = scenes(&dir, &[]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k": 6, "alpha": 0.3, "encoding_mode": "cartesian"}"#).unwrap();
    let out_path = dir.path().join("r.jsonl");
    ok(a2b(&[
        "run",
        "--seed",
        "2",
        "--config",
        p(&cfg),
        "--alpha",
        "0.25",
        "--strict-corner",
        "--scenes",
        p(&s),
        "--out",
        p(&out_path),
    ]));
    let rec = &lines(&out_path)[0];
    assert_eq!(rec["mode"], "cartesian");
    assert_eq!(rec["config"]["k"], 6);
    assert_eq!(rec["config"]["alpha"], 0.25);
    assert_eq!(rec["config"]["corner_tau_px"], 3.0);
}
