use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FLAT: &str = r#"{"backend":"special-form","p":[],"q":[],"r":[]}"#;
const EXAMPLE: &str = r#"{
  "id": "example",
  "backend": "special-form",
  "p": [{"coeff": "-2", "exps": [0, 0, 1, 1]}],
  "q": [{"coeff": "-2", "exps": [0, 0, 1, 1]}],
  "r": [{"coeff": "1", "exps": [0, 0, 2, 0]}, {"coeff": "1", "exps": [0, 0, 0, 2]}]
}"#;

fn nsdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsdt")).args(args).env_remove("NSDT_SEED").output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nsdt-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn status_of(report: &serde_json::Value, check: &str) -> String {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == check)
        .map(|c| c["status"].as_str().unwrap().to_string())
        .unwrap()
}

#[test]
fn flat_spec_passes() {
    let dir = scratch("flat");
    let spec = write(&dir, "flat.json", FLAT);
    let o = nsdt(&["check", &spec, "--no-timings"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metric_id"], "flat");
    assert_eq!(status_of(&v, "sd"), "exact-zero");
    assert_eq!(status_of(&v, "basic"), "exact-zero");
}

#[test]
fn example_is_sd_but_not_basic() {
    let dir = scratch("example");
    let spec = write(&dir, "example.json", EXAMPLE);
    let o = nsdt(&["check", &spec, "--no-timings"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(status_of(&v, "sd"), "exact-zero");
    assert_eq!(status_of(&v, "basic"), "fail");
    let basic = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "basic").unwrap();
    assert!(basic["failing"].as_array().unwrap().iter().any(|id| id == "p0 q1"));
    let text = stdout(&nsdt(&["check", &spec, "--report", "text"]));
    assert!(text.contains("basic         fail"));
}

#[test]
fn malformed_spec_exits_2() {
    let dir = scratch("bad");
    let spec = write(&dir, "bad.json", "{\"backend\": ");
    assert_eq!(nsdt(&["check", &spec]).status.code(), Some(2));
    let missing = dir.join("absent.json");
    assert_eq!(nsdt(&["check", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nsdt(&["check"]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_without_timings() {
    let dir = scratch("det");
    let spec = write(&dir, "example.json", EXAMPLE);
    let a = nsdt(&["check", &spec, "--no-timings", "--seed", "7"]);
    let b = nsdt(&["check", &spec, "--no-timings", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("timings_ms"));
    assert!(stdout(&nsdt(&["check", &spec])).contains("timings_ms"));
}

#[test]
fn seed_env_var_sets_probe_seed() {
    let dir = scratch("env");
    let spec = write(&dir, "flat.json", FLAT);
    let o = Command::new(env!("CARGO_BIN_EXE_nsdt"))
        .args(["check", &spec, "--no-timings"])
        .env("NSDT_SEED", "1234")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["probes"]["seed"], 1234);
}

#[test]
fn generate_constant_spec_checks_clean() {
    let dir = scratch("gen0");
    let out = dir.join("specs");
    let o = nsdt(&["generate", "--fiber-degree", "0", "--base-degree", "0", "--count", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let path = stdout(&o).lines().next().unwrap().to_string();
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    for f in ["p", "q", "r"] {
        assert!(spec[f].as_array().unwrap().iter().all(|t| t["exps"] == serde_json::json!([0, 0, 0, 0])));
    }
    assert_eq!(nsdt(&["check", &path, "--no-timings"]).status.code(), Some(0));
}

#[test]
fn generate_twenty_all_pass_sd() {
    let dir = scratch("gen20");
    let out = dir.join("specs");
    let o = nsdt(&["generate", "--count", "20", "--seed", "42", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let paths: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(paths.len(), 20);
    for p in &paths {
        let r = nsdt(&["check", p, "--no-timings"]);
        let v: serde_json::Value = serde_json::from_str(&stdout(&r)).unwrap();
        assert_eq!(status_of(&v, "sd"), "exact-zero", "{p}");
    }
}

#[test]
fn trace_standard_model_closes() {
    let dir = scratch("trace");
    let csv = dir.join("t.csv");
    let o = nsdt(&["trace", "--metric", "std-s2xs2", "--init", "1.2", "0.3", "1.0", "2.0", "1", "0", "1", "0", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("closed, period ≈ 6.2832"), "{}", stdout(&o));
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().next().unwrap(), "t,x0,x1,x2,x3,v0,v1,v2,v3,null_defect");
    assert_eq!(body.lines().count(), 7002);
}

#[test]
fn trace_flat_is_open() {
    let dir = scratch("trace-flat");
    let spec = write(&dir, "flat.json", FLAT);
    let o = nsdt(&["trace", "--metric", &spec, "--init", "0", "0", "0", "0", "1", "0", "0", "1", "--steps", "2000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("open"));
}

#[test]
fn trace_without_init_is_usage_error() {
    assert_eq!(nsdt(&["trace", "--metric", "std-s2xs2"]).status.code(), Some(2));
    assert_eq!(nsdt(&["trace", "--init", "1", "2"]).status.code(), Some(2));
}

#[test]
fn classify_diagonal_planes() {
    let alpha = nsdt(&["classify", "--point", "1", "1", "1", "1", "--v", "1", "0", "1", "0", "--w", "0", "1", "0", "1"]);
    assert_eq!(stdout(&alpha).trim(), r#"{"class":"Alpha"}"#);
    let beta = nsdt(&["classify", "--point", "1", "1", "1", "1", "--v", "1", "0", "1", "0", "--w", "0", "1", "0", "-1"]);
    assert_eq!(stdout(&beta).trim(), r#"{"class":"Beta"}"#);
    let spacelike = nsdt(&["classify", "--point", "1", "1", "1", "1", "--v", "1", "0", "0", "0", "--w", "0", "1", "0", "0"]);
    assert_eq!(stdout(&spacelike).trim(), r#"{"class":"NotTotallyNull"}"#);
}
