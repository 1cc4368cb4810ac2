use std::path::Path;
use std::process::{Command, Output};

use collabline::synth::{generate, GenConfig};

const BIN: &str = env!("CARGO_BIN_EXE_collabline");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("COLLABLINE_WORKSPACE").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(seed: u64) -> GenConfig {
    GenConfig { seed, n_inventors: 2000, years: (1990, 1999), patents_per_year: 200, ..GenConfig::default() }
}

/// Generates data under `root/data` and ingests it into `root/ws`.
fn workspace(root: &Path, cfg: &GenConfig) -> std::path::PathBuf {
    let data = root.join("data");
    std::fs::create_dir_all(&data).unwrap();
    generate(cfg).unwrap().write_csv(&data).unwrap();
    let ws = root.join("ws");
    ok(&[
        "ingest",
        "--patents",
        s(&data.join("patents.csv")),
        "--citations",
        s(&data.join("citations.csv")),
        "--workspace",
        s(&ws),
    ]);
    ws
}

fn read_dir(dir: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| !skip.contains(&e.file_name().to_str().unwrap()))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn version_and_usage_exit_codes() {
    let out = ok(&["--version"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.1.0"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "p9", "--workspace", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(run(&["summarize"]).status.code(), Some(1), "workspace is required");
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["summarize", "--workspace", s(&missing)]).status.code(), Some(2));

    let patents = dir.path().join("patents.csv");
    let citations = dir.path().join("citations.csv");
    std::fs::write(&patents, "patent_id,year,inventors,classes\nA,2000,x;y,C1\nA,2001,x,C1\n").unwrap();
    std::fs::write(&citations, "citing,cited\n").unwrap();
    let out = run(&[
        "ingest",
        "--patents",
        s(&patents),
        "--citations",
        s(&citations),
        "--workspace",
        s(&dir.path().join("ws")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("ws").exists());
}

#[test]
fn invalid_analysis_options_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), &small_config(1));
    let out_dir = dir.path().join("out");
    let code = |extra: &[&str]| {
        let mut args = vec!["analyze", "sweep", "--workspace", s(&ws), "--out", s(&out_dir)];
        args.extend_from_slice(extra);
        run(&args).status.code()
    };
    assert_eq!(code(&["--thresholds", "4,2"]), Some(1));
    assert_eq!(code(&["--impact-bin-width", "0"]), Some(1));
    assert_eq!(code(&["--hit", "top0"]), Some(1));
    assert!(!out_dir.exists());
    assert_eq!(code(&[]), Some(0));
}

#[test]
fn workspace_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), &small_config(2));
    let out = Command::new(BIN).arg("summarize").env("COLLABLINE_WORKSPACE", &ws).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_patents"], 2000);
}

#[test]
fn analysis_without_hits_writes_empty_tables_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), &small_config(3));
    let out = dir.path().join("p3");
    ok(&["analyze", "p3", "--workspace", s(&ws), "--hit", "gt:1000000", "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("series.csv")).unwrap(), "bin,mean,se,n,label\n");
    assert_eq!(std::fs::read_to_string(out.join("tests.csv")).unwrap(), "bin,u,z,p,n1,n2\n");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("run_manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> =
        manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(listed, ["series.csv", "tests.csv", "provenance.json"]);
}

#[test]
fn input_row_order_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(dir.path(), &small_config(4));

    let shuffled = dir.path().join("shuffled");
    std::fs::create_dir_all(&shuffled).unwrap();
    for name in ["patents.csv", "citations.csv"] {
        let text = std::fs::read_to_string(dir.path().join("data").join(name)).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        lines.reverse();
        let third = lines.len() / 3;
        lines.rotate_left(third);
        std::fs::write(shuffled.join(name), format!("{header}\n{}\n", lines.join("\n"))).unwrap();
    }
    let ws2 = dir.path().join("ws2");
    ok(&[
        "ingest",
        "--patents",
        s(&shuffled.join("patents.csv")),
        "--citations",
        s(&shuffled.join("citations.csv")),
        "--workspace",
        s(&ws2),
    ]);
    for w in [&ws, &ws2] {
        ok(&["impact", "--workspace", s(w)]);
    }
    assert_eq!(read_dir(&ws, &[]), read_dir(&ws2, &[]));

    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    ok(&["report", "--workspace", s(&ws), "--out", s(&r1), "--min-samples", "10"]);
    ok(&["report", "--workspace", s(&ws2), "--out", s(&r2), "--min-samples", "10"]);
    assert_eq!(read_dir(&r1, &["run_manifest.json"]), read_dir(&r2, &["run_manifest.json"]));
}

#[test]
fn planted_decline_shows_in_the_stay_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig { beta: 0.3, p0: 0.8, ..small_config(5) };
    let ws = workspace(dir.path(), &cfg);
    let out = dir.path().join("p2");
    ok(&["analyze", "p2", "--workspace", s(&ws), "--min-samples", "5", "--out", s(&out)]);
    let text = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let means: Vec<(i64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert!(means.len() >= 3, "{text}");
    assert_eq!(means[0].0, 1);
    assert!(means[0].1 > means[2].1, "{text}");
}

#[test]
fn compare_p1_runs_across_two_workspaces() {
    let dir = tempfile::tempdir().unwrap();
    let persistent = workspace(&dir.path().join("a"), &GenConfig { alpha: 0.4, ..small_config(6) });
    let fleeting = workspace(&dir.path().join("b"), &small_config(7));
    let out = dir.path().join("cmp");
    ok(&["compare-p1", s(&persistent), s(&fleeting), "--min-samples", "20", "--out", s(&out)]);
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(
        series.lines().any(|l| l.ends_with(",first")) && series.lines().any(|l| l.ends_with(",second")),
        "{series}"
    );
    let tests = std::fs::read_to_string(out.join("tests.csv")).unwrap();
    let p: Vec<f64> = tests.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(p.iter().any(|&p| p < 0.05), "{tests}");
    let provenance: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance["provenance"]["min_samples"], 20);
    assert!(out.join("tests.csv").exists() && out.join("run_manifest.json").exists());
}
