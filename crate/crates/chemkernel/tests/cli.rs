use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chemkernel"));
    c.env_remove("CHEMKERNEL_SEED");
    c
}

fn net(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(name).to_string_lossy().into_owned()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn records(p: &Path) -> Vec<Value> {
    read(p).lines().map(|l| serde_json::from_str(l).expect("jsonl line")).collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&read(&dir.join("summary.json"))).unwrap()
}

#[test]
fn compile_writes_map_and_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r1.cahw");
    let o = run(bin().args(["compile", &net("rnet1.cadl"), "-o"]).arg(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("k_mem[1]=20.0"), "{text}");
    assert!(text.contains("r2"));
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(&bytes[..4], b"CAHW");

    let o = run(bin().args(["run", "--duration", "0.5", "--inflow", "S1=1000", "--tap", "S4", "--out"]).arg(tmp.path().join("o")).arg(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(summary(&tmp.path().join("o"))["final"]["S4"].as_u64().unwrap() > 0);
}

#[test]
fn compile_over_limits_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(bin().args(["compile", &net("rnet1.cadl"), "--limits", "R=1", "-o"]).arg(tmp.path().join("x.cahw")));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("reaction count"), "{}", stderr(&o));
    assert!(!tmp.path().join("x.cahw").exists());

    let o = run(bin().args(["compile", &net("rnet1.cadl"), "-q", "--limits", "R=32", "-o"]).arg(tmp.path().join("y.cahw")));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn scenario_runs_are_reproducible_and_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let go = |dir: &str| {
        let d = tmp.path().join(dir);
        let o = run(bin().args(["run", "--scenario", "builtin:fig7", "--duration", "6", "--seed", "42", "--out"]).arg(&d));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        d
    };
    let (a, b) = (go("a"), go("b"));
    for f in ["trace.jsonl", "metrics.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs between identical runs");
    }
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("files");
        v
    };
    assert_eq!(strip(summary(&a)), strip(summary(&b)));
    let recs = records(&a.join("trace.jsonl"));
    assert_eq!(recs[0]["type"], "header");
    assert_eq!(recs[0]["seed"], 42);
    let reconf: Vec<&Value> = recs.iter().filter(|r| r["type"] == "reconfig").collect();
    assert_eq!(reconf.len(), 1);
    assert_eq!(reconf[0]["t"], 5.0);
    assert_eq!(reconf[0]["kind"], "structural");
    let metrics = read(&a.join("metrics.csv"));
    assert!(metrics.starts_with("# tool=chemkernel"), "{}", &metrics[..80]);
    assert!(metrics.contains("seed=42"));
    let s = summary(&a);
    assert_eq!(s["provenance"]["seed"], 42);
    assert_eq!(s["conservation_violations"], 0);
}

#[test]
fn hardware_and_reference_agree_without_saturation() {
    let tmp = tempfile::tempdir().unwrap();
    let go = |engine: &str| {
        let d = tmp.path().join(engine);
        let o = run(bin()
            .args(["run", &net("rnet1.cadl"), "--engine", engine, "--limits", "C=32", "--inflow", "S=100000"])
            .args(["--duration", "0.05", "--trace-firings", "--seed", "3", "--out"])
            .arg(&d));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let fired: Vec<(String, f64)> = records(&d.join("trace.jsonl"))
            .iter()
            .filter(|r| r["type"] == "fired")
            .map(|r| (r["reaction"].as_str().unwrap().to_string(), r["t"].as_f64().unwrap()))
            .collect();
        (fired, summary(&d))
    };
    let ((sw, s1), (hw, s2)) = (go("ssa"), go("hw"));
    assert!(sw.len() > 100);
    assert_eq!(sw.len(), hw.len());
    for (a, b) in sw.iter().zip(&hw) {
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() <= 1e-5 * a.1.max(1e-3), "{a:?} vs {b:?}");
    }
    assert_eq!(s1["final"], s2["final"]);
    assert_eq!(s2["provenance"]["engine"], "hw");
}

#[test]
fn patches_apply_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("o");
    let o = run(bin()
        .args(["run", &net("rnet2.cadl"), "--inflow", "S=1000", "--duration", "3", "--tap", "P"])
        .arg(format!("--patch=t=1:{}", net("to_rnet1.capatch")))
        .arg(format!("--patch=t=2:{}", net("slow_release.capatch")))
        .arg("--out")
        .arg(&d));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(&d.join("trace.jsonl"));
    let reconf: Vec<&Value> = recs.iter().filter(|r| r["type"] == "reconfig").collect();
    assert_eq!(reconf.len(), 2);
    assert_eq!(reconf[0]["kind"], "structural");
    assert!(reconf[0]["network"].as_str().unwrap().contains("S + E -> ES"));
    assert_eq!(reconf[1]["kind"], "parametric");
    assert_eq!(summary(&d)["fire_counts"].as_object().unwrap().len(), 2);
}

#[test]
fn network_file_as_patch() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("o");
    let o = run(bin()
        .args(["run", &net("rnet2.cadl"), "--inflow", "S=1000", "--duration", "2"])
        .arg(format!("--patch=t=1:{}", net("rnet1.cadl")))
        .arg("--out")
        .arg(&d));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(&d.join("trace.jsonl"));
    assert_eq!(recs.iter().filter(|r| r["type"] == "reconfig").count(), 1);
}

#[test]
fn patch_after_end_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["run", &net("rnet2.cadl"), "--inflow", "S=1000", "--duration", "1"])
        .arg(format!("--patch=t=5:{}", net("to_rnet1.capatch")))
        .arg("--out")
        .arg(tmp.path()));
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["run".into(), "--scenario".into(), tmp.path().join("missing.scn").to_string_lossy().into()],
        vec!["run".into(), net("rnet1.cadl"), "--duration".into(), "1".into(), "--inflow".into(), "Q=5".into()],
        vec!["analyze".into(), net("rnet1.cadl"), "--inflow".into(), "Q=5".into()],
        vec!["frobnicate".into()],
        vec!["compile".into(), tmp.path().join("nope.cadl").to_string_lossy().into()],
    ];
    for args in cases {
        let o = run(bin().args(&args).current_dir(tmp.path()));
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn analyze_reports_fixed_point_and_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let traj = tmp.path().join("traj.csv");
    let o = run(bin().args(["analyze", &net("rnet1.cadl"), "--inflow", "S=250000", "--out"]).arg(&traj));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("fixed point"), "{text}");
    assert!(text.contains("P = 250000"), "{text}");
    assert!(text.contains("below the cap"), "{text}");
    assert!(read(&traj).starts_with("# tool=chemkernel"));

    let o = run(bin().args(["analyze", &net("rnet1.cadl"), "--inflow", "S=1000000", "--out"]).arg(&traj));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("divergent"), "{}", stdout(&o));
}

#[test]
fn compare_in_the_equivalence_regime() {
    let o = run(bin().args(["compare", &net("rnet1.cadl"), "--inflow", "S=100000", "--duration", "0.2", "--limits", "C=32"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("no divergence"), "{}", stdout(&o));
}

#[test]
fn compare_reports_saturation() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("boom.cadl");
    std::fs::write(&path, "species A init 60000\nspecies B init 0\nreaction grow: A -> 2 A @ k=1\nreaction leak: A -> B @ k=0.5\n").unwrap();
    let o = run(bin().args(["compare"]).arg(&path).args(["--duration", "0.5"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("saturated A"), "{text}");
    assert!(text.contains("divergence at firing"), "{text}");
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(bin()
        .env("CHEMKERNEL_SEED", "9")
        .args(["run", &net("rnet1.cadl"), "--duration", "0.1", "--out"])
        .arg(tmp.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(summary(tmp.path())["provenance"]["seed"], 9);
}

#[test]
fn scenario_file_with_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(bin().args(["run", "--scenario", &net("limiter.scn"), "--format", "jsonl", "--out"]).arg(tmp.path()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(tmp.path());
    assert_eq!(s["provenance"]["seed"], 5);
    let rows = records(&tmp.path().join("metrics.jsonl"));
    assert_eq!(rows[0]["type"], "header");
    assert!(rows.len() > 10);
    assert!(tmp.path().join("taps.jsonl").exists());
}
