use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kirigami")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_dataset(dir: &Path) {
    let o = run(dir, &["gen", "--count", "4", "--split", "test", "--seed", "0", "--out", "ds"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap()
}

#[test]
fn gen_writes_verifies_and_echoes() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["gen", "--count", "20", "--split", "test", "--seed", "0", "--out", "ds"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("acceptance rate") && out.contains("min IoU 1"));
    let names = std::fs::read_dir(t.path().join("ds/test")).unwrap().count();
    assert_eq!(names, 40);
    let echo: serde_json::Value = serde_json::from_slice(&read(t.path(), "ds/gen.config.json")).unwrap();
    assert_eq!(echo["count"], 20);
    assert_eq!(echo["tau_siou"], 0.85);
    assert_eq!(echo["grid"], "10x10");
    assert!(echo["version"].is_string());
}

#[test]
fn gen_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        assert_eq!(code(&run(t.path(), &["gen", "--count", "3", "--split", "val", "--seed", "4", "--out", d])), 0);
    }
    for f in ["manifest.json", "val/val-00000.x.txt", "val/val-00002.pgm"] {
        assert_eq!(read(t.path(), &format!("a/{f}")), read(t.path(), &format!("b/{f}")));
    }
}

#[test]
fn gen_without_out_is_a_config_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(t.path(), &["gen", "--count", "3"])), 2);
}

#[test]
fn gen_stall_exits_3() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("cfg.txt"), "# squashed deployment\nphi = 0.2\ntau_ov = 0.0\n").unwrap();
    let o = run(t.path(), &["gen", "--config", "cfg.txt", "--count", "2", "--split", "test", "--out", "ds"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_reports_summary_and_jsonl() {
    let t = tempfile::tempdir().unwrap();
    small_dataset(t.path());
    let o = run(t.path(), &["solve", "--method", "pso", "--k", "2", "--dataset", "ds", "--max-evals", "48", "--out", "r"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("mean sIoU"));
    let text = String::from_utf8(read(t.path(), "r/solve.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        // Two runs per target, each capped at 48.
        assert_eq!(r["evals"], 96);
        for key in ["method", "seed", "grid", "target_id", "siou", "success", "seconds", "stop_reason"] {
            assert!(!r[key].is_null(), "{key}");
        }
    }
}

#[test]
fn solve_is_reproducible_from_its_echo() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["solve", "--method", "powell", "--targets", "circle", "--grid", "6", "--max-evals", "40", "--out", "r"]);
    assert_eq!(code(&o), 0);
    let first = read(t.path(), "r/solve.jsonl");
    std::fs::rename(t.path().join("r/solve.config.json"), t.path().join("echo.json")).unwrap();
    assert_eq!(code(&run(t.path(), &["solve", "--config", "echo.json"])), 0);
    let again = read(t.path(), "r/solve.jsonl");
    let strip = |b: &[u8]| -> Vec<serde_json::Value> {
        String::from_utf8_lossy(b)
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("seconds");
                v
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&again));
}

#[test]
fn solve_errors() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(t.path(), &["solve", "--method", "nelder", "--targets", "heart"])), 2);
    assert_eq!(code(&run(t.path(), &["solve", "--dataset", "missing"])), 2);
    assert_eq!(code(&run(t.path(), &["solve", "--method", "pso"])), 2);
}

#[test]
fn eval_identity_tv_and_mismatch() {
    let t = tempfile::tempdir().unwrap();
    small_dataset(t.path());
    let y = "ds/test/test-00001.pgm";
    let o = run(t.path(), &["eval", "--pred", y, "--target", y]);
    assert_eq!(code(&o), 0);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(rec["siou"], 1.0);

    let o = run(t.path(), &["eval", "--pred", "ds/test/test-00001.x.txt", "--target", y, "--report-tv"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("TV ")));
    let rec: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(rec["siou"], 1.0);
    assert_eq!(rec["success"], true);

    std::fs::write(t.path().join("small.pgm"), b"P5\n4 4\n255\n\xff\xff\xff\xff\xff\xff\xff\xff\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
    assert_eq!(code(&run(t.path(), &["eval", "--pred", "small.pgm", "--target", y])), 2);
}

#[test]
fn grpo_trace_and_checkpoint() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["grpo", "--mode", "regularity", "--calls", "400", "--group", "4", "--grid", "4", "--out", "g"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("100 groups"));
    let text = String::from_utf8(read(t.path(), "g/grpo_trace.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 100);
    assert_eq!(rows.last().unwrap()["call_count"], 400);
    assert!(rows.iter().all(|r| r["tv_of_best"].is_number()));
    let policy: serde_json::Value = serde_json::from_slice(&read(t.path(), "g/policy.json")).unwrap();
    assert_eq!(policy["mean_z"].as_array().unwrap().len(), 16);
    assert_eq!(code(&run(t.path(), &["grpo", "--mode", "bogus"])), 2);
}

#[test]
fn bench_appends_with_run_ids() {
    let t = tempfile::tempdir().unwrap();
    let args = ["bench", "--grids", "6", "--methods", "pso,powell", "--targets", "circle", "--max-evals", "24", "--out", "b"];
    assert_eq!(code(&run(t.path(), &args)), 0);
    assert_eq!(code(&run(t.path(), &args)), 0);
    let text = String::from_utf8(read(t.path(), "b/bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "run_id,grid,method,target,seconds,evals");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1,6,pso,circle,") && lines[4].starts_with("2,6,powell,circle,"));
    assert_eq!(code(&run(t.path(), &["bench", "--grids", "6,25"])), 2);
}

#[test]
fn export_feasible_infeasible_and_untrimmed() {
    let t = tempfile::tempdir().unwrap();
    small_dataset(t.path());
    let f = "ds/test/test-00000.x.txt";
    let o = run(t.path(), &["export", "--field", f, "--scale-mm", "2", "--out", "cut.dxf"]);
    assert_eq!(code(&o), 0);
    let dxf = String::from_utf8(read(t.path(), "cut.dxf")).unwrap();
    assert!(dxf.contains("CONNECTOR") && dxf.ends_with("0\nEOF\n"));
    assert!(t.path().join("cut.dxf.config.json").exists());

    let o = run(t.path(), &["export", "--field", f, "--connector-radius", "0", "--out", "plain.dxf"]);
    assert_eq!(code(&o), 0);
    let dxf = String::from_utf8(read(t.path(), "plain.dxf")).unwrap();
    assert_eq!(dxf.matches("POLYLINE").count(), 100);
    assert_eq!(dxf.matches("CIRCLE").count(), 0);

    let o = run(t.path(), &["export", "--field", f, "--phi", "1.0", "--out", "bad.dxf"]);
    assert_eq!(code(&o), 5);
    assert!(!t.path().join("bad.dxf").exists());
}
