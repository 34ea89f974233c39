use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roe_core::{ForceModel, Scenario, ScenarioConfig};
use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn roeplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roeplan")).args(args).output().expect("run roeplan")
}

fn ok_stdout(args: &[&str]) -> String {
    let o = roeplan(args);
    assert!(o.status.success(), "roeplan {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn lib_scenario(path: &Path) -> Scenario {
    let cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    cfg.resolve().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn dvmin_reports_test1_minima() {
    let out = ok_stdout(&["dvmin", "--config", p(&scenario("test1.json"))]);
    assert!(out.contains("dv_min_in_plane_mps        0.0780"), "{out}");
    assert!(out.contains("dv_min_out_of_plane_mps    0.0085"), "{out}");
}

#[test]
fn dvmin_json_equals_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let mut k = 0;
    for a_km in [8000.0, 20000.0] {
        for e in [0.05, 0.3, 0.7] {
            for i_deg in [5.0, 60.0] {
                let cfg = serde_json::json!({
                    "name": format!("fuzz{k}"),
                    "chief": { "a_km": a_km, "e": e, "i_deg": i_deg, "raan_deg": 10.0 * k as f64, "argp_deg": 37.0 * k as f64, "mean_anomaly_deg": 0.0 },
                    "roe_initial": { "form": "modified", "values_m": [10.0, -500.0, 20.0 * k as f64, 5.0, -3.0, 8.0] },
                    "roe_final": { "form": "modified", "values_m": [-40.0, 900.0, 150.0, -70.0 - k as f64, 25.0, 12.0] },
                    "duration": { "orbits": 2.5 }
                });
                let path = dir.path().join(format!("fuzz{k}.json"));
                std::fs::write(&path, cfg.to_string()).unwrap();
                let got: Value = serde_json::from_str(&ok_stdout(&["dvmin", "--config", p(&path), "--format", "json"])).unwrap();
                let want = serde_json::to_value(lib_scenario(&path).dominance().unwrap()).unwrap();
                assert_eq!(got, want, "config {k}");
                k += 1;
            }
        }
    }
}

#[test]
fn zero_target_gives_zero_minima() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.json");
    std::fs::write(
        &path,
        r#"{"name":"zero","chief":{"a_km":9000,"e":0.2,"i_deg":30,"raan_deg":0,"argp_deg":10,"mean_anomaly_deg":0},
            "roe_initial":{"form":"modified","values_m":[0,0,0,0,0,0]},
            "roe_final":{"form":"modified","values_m":[0,0,0,0,0,0]},
            "duration":{"orbits":2}}"#,
    )
    .unwrap();
    let v: Value = serde_json::from_str(&ok_stdout(&["dvmin", "--config", p(&path), "--format", "json"])).unwrap();
    for key in ["dv_min", "dv_min_in_plane", "dv_min_out_of_plane", "dv_min_total"] {
        assert_eq!(v[key].as_f64(), Some(0.0), "{key}");
    }
}

#[test]
fn plan_lists_ten_test1_candidates() {
    let v: Value =
        serde_json::from_str(&ok_stdout(&["plan", "--config", p(&scenario("test1.json")), "--format", "json"])).unwrap();
    let plans = v["plans"].as_array().unwrap();
    assert_eq!(plans.len(), 10);
    let four = plans.iter().any(|pl| {
        let b = pl["burns"].as_array().unwrap();
        let t: Vec<f64> = b.iter().map(|r| r["epoch_s"].as_f64().unwrap()).collect();
        t.len() == 4 && [826.28, 12328.94, 13397.11, 19109.30].iter().zip(&t).all(|(a, b)| (a - b).abs() < 0.5)
    });
    assert!(four);
    assert!(plans.iter().all(|pl| pl["optimality"] == "optimal"));
}

#[test]
fn suboptimal_variant_is_flagged() {
    let out = ok_stdout(&["plan", "--config", p(&scenario("test1_suboptimal.json"))]);
    let first = out.lines().find(|l| l.starts_with("plan 00")).unwrap();
    assert!(first.contains("suboptimal(0.27"), "{first}");
}

#[test]
fn short_window_exits_infeasible_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("test1.json")).unwrap().replace("\"orbits\": 2.2", "\"orbits\": 0.05");
    let path = dir.path().join("short.json");
    std::fs::write(&path, text).unwrap();
    let o = roeplan(&["plan", "--config", p(&path)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("earliest feasible duration"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("test1.json")).unwrap().replace("\"e\": 0.5", "\"e\": 0.5, \"ecc\": 1");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let o = roeplan(&["dvmin", "--config", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chief.ecc"));

    let o = roeplan(&["dvmin", "--config", p(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = roeplan(&["dvmin"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plan_then_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("test1.json");
    ok_stdout(&["plan", "--config", p(&cfg), "--out", p(dir.path())]);
    let best = dir.path().join("best_plan.json");
    assert!(best.exists());
    assert!(dir.path().join("plans.txt").exists());
    let v: Value =
        serde_json::from_str(&ok_stdout(&["validate", "--config", p(&cfg), "--plan", p(&best), "--format", "json"])).unwrap();
    assert_eq!(v["all_within"], true);
    assert_eq!(v["oracle"].as_array().unwrap().len(), 2);
    let text = ok_stdout(&["validate", "--config", p(&cfg), "--plan", p(&best)]);
    assert!(text.contains("all within tolerance: true"));
}

#[test]
fn zero_burn_plan_matches_free_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("test1.json");
    let plan = dir.path().join("empty.json");
    std::fs::write(&plan, "[]").unwrap();
    let v: Value = serde_json::from_str(&ok_stdout(&[
        "validate",
        "--config",
        p(&cfg),
        "--plan",
        p(&plan),
        "--no-oracle",
        "--format",
        "json",
    ]))
    .unwrap();
    let free = lib_scenario(&cfg).propagate(&[], ForceModel::KeplerJ2).unwrap();
    for (k, row) in v["rows"].as_array().unwrap().iter().enumerate() {
        assert_eq!(row["achieved_m"].as_f64().unwrap(), free.achieved_final_roe[k]);
    }
}

#[test]
fn error_report_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("test2.json");
    ok_stdout(&["plan", "--config", p(&cfg), "--out", p(dir.path())]);
    let plan = dir.path().join("plan_00.json");
    let errs = scenario("test2_errors.json");
    let run = |threads: &str| {
        ok_stdout(&["error", "--config", p(&cfg), "--plan", p(&plan), "--errors", p(&errs), "--format", "csv", "--threads", threads])
    };
    let a = run("1");
    assert_eq!(a, run("4"));
    assert_eq!(a.lines().count(), 1 + 4 * 6);
    assert!(a.starts_with("source,roe,mean_m,variance_m2,center_m,lower_m,upper_m,half_width_m"));
    let other = ok_stdout(&[
        "error", "--config", p(&cfg), "--plan", p(&plan), "--errors", p(&errs), "--format", "csv", "--seed", "7",
    ]);
    assert_ne!(a, other, "a different seed changes the Monte-Carlo rows");
}

#[test]
fn reachset_writes_hull_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("test1.json");
    let out = ok_stdout(&["reachset", "--config", p(&cfg), "--plane", "de_tilde", "--cost", "0.01", "--format", "csv"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("plane,nu_rad,x_m,y_m,dv_r,dv_t,dv_n"));
    assert!(lines.count() >= 3);
    ok_stdout(&["reachset", "--config", p(&cfg), "--plane", "dadl", "--format", "csv", "--out", p(dir.path())]);
    assert!(dir.path().join("reachset_dadl_hull.csv").exists());
    assert!(dir.path().join("reachset_dadl_points.csv").exists());
    let o = roeplan(&["reachset", "--config", p(&cfg), "--plane", "xy"]);
    assert_eq!(o.status.code(), Some(2));
}
