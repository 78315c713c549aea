use std::fs;
use std::path::Path;
use std::process::Command;

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_swarmsched")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_solve_validate_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let (code, _) = cli(&["generate", "--l", "2", "--m", "4", "--n", "3", "--seed", "7", "--out", p(&inst)]);
    assert_eq!(code, 0);

    for method in ["greedy", "exact"] {
        let out = dir.path().join(format!("{method}.json"));
        let (code, _) = cli(&["solve", "--method", method, "--instance", p(&inst), "--out", p(&out)]);
        assert_eq!(code, 0);
        let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(result["makespan"].as_f64().unwrap() > 0.0);
        assert!(result["incumbents"].as_array().is_some_and(|a| !a.is_empty()));
        let expected = if method == "exact" { "proved_optimal" } else { "heuristic" };
        assert_eq!(result["status"], expected);

        let sched = dir.path().join(format!("{method}_schedule.json"));
        fs::write(&sched, result["schedule"].to_string()).unwrap();
        let (code, report) = cli(&["validate", "--instance", p(&inst), "--schedule", p(&sched)]);
        assert_eq!(code, 0, "{report}");
        let (code, stats) = cli(&[
            "simulate",
            "--instance",
            p(&inst),
            "--schedule",
            p(&sched),
            "--trials",
            "500",
            "--seed",
            "1",
        ]);
        assert_eq!(code, 0);
        assert!(stats.contains("min_on_time_fraction"));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    cli(&["generate", "--l", "2", "--m", "3", "--n", "2", "--out", p(&inst)]);
    let sched = dir.path().join("empty.json");
    fs::write(&sched, r#"{"routes":[[],[]]}"#).unwrap();
    assert_eq!(cli(&["validate", "--instance", p(&inst), "--schedule", p(&sched)]).0, 1);
    assert_eq!(cli(&["solve", "--method", "fastest", "--instance", p(&inst)]).0, 2);
    assert_eq!(cli(&["validate", "--instance", p(&dir.path().join("missing.json")), "--schedule", p(&sched)]).0, 1);

    let big = dir.path().join("big.json");
    cli(&["generate", "--l", "4", "--m", "12", "--n", "6", "--seed", "3", "--out", p(&big)]);
    let (code, out) = cli(&["solve", "--method", "exact", "--instance", p(&big), "--node-limit", "50"]);
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("incumbent_only"));
}

#[test]
fn bench_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    fs::write(
        &suite,
        r#"{"shapes":[{"l":2,"m":4,"n":3}],"seeds":{"start":0,"count":3},"solvers":["greedy","exact"],"time_limit_s":20}"#,
    )
    .unwrap();
    let csv = dir.path().join("results.csv");
    assert_eq!(cli(&["bench", "--suite", p(&suite), "--out", p(&csv)]).0, 0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 7);
    assert!(dir.path().join("results_relative.csv").exists());
    let plots = dir.path().join("plots");
    let (code, listing) = cli(&["plot", "--csv", p(&csv), "--out-dir", p(&plots)]);
    assert_eq!(code, 0);
    assert_eq!(listing.lines().count(), 3);
    assert!(plots.join("relative_cost.svg").exists());
}
