use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn noir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noir"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_flag() {
    let out = noir(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn generate_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("grid.json");
    let out = noir(&["generate", "--preset", "grid", "--seed", "4", "--out", path(&net)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = noir(&["validate", path(&net)]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8_lossy(&out.stdout);
    assert_eq!(report.matches("PASS").count(), 5, "{report}");
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(noir(&["generate", "--preset", "philadelphia", "--seed", "2", "--out", path(p)])
            .status
            .success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn failing_network_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("bad.json");
    // The inlet feeds the outlet directly and the interior road is a dead end.
    fs::write(
        &net,
        r#"{"n_in": 1, "n_boundary": 2, "n_total": 3,
            "nodes": [{"id": 1, "class": "inlet"}, {"id": 2, "class": "outlet"},
                      {"id": 3, "class": "interior", "length_m": 100.0, "lanes": 1}],
            "edges": [[1, 2], [1, 3]]}"#,
    )
    .unwrap();
    let out = noir(&["validate", path(&net)]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("FAIL"), "{report}");
}

#[test]
fn schema_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("gap.json");
    fs::write(
        &net,
        r#"{"n_in": 1, "n_boundary": 2, "n_total": 3,
            "nodes": [{"id": 1, "class": "inlet"}, {"id": 2, "class": "outlet"},
                      {"id": 4, "class": "interior", "length_m": 100.0, "lanes": 1}],
            "edges": []}"#,
    )
    .unwrap();
    let out = noir(&["validate", path(&net)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing id 3"));
}

#[test]
fn missing_file_exits_three() {
    let out = noir(&["validate", "/nonexistent/network.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("grid.json");
    let cfg = dir.path().join("cfg.json");
    assert!(noir(&["generate", "--preset", "grid", "--out", path(&net)]).status.success());
    fs::write(&cfg, r#"{"steps": 3, "horizon": 4}"#).unwrap();
    let out = noir(&[
        "simulate",
        "--network",
        path(&net),
        "--config",
        path(&cfg),
        "--out",
        path(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn simulate_writes_reproducible_report() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("grid.json");
    let cfg = dir.path().join("cfg.json");
    assert!(noir(&["generate", "--preset", "grid", "--seed", "1", "--out", path(&net)])
        .status
        .success());
    fs::write(&cfg, r#"{"steps": 12, "seed": 5, "d0": 20}"#).unwrap();

    let mut summaries = Vec::new();
    for name in ["run1", "run2"] {
        let out_dir = dir.path().join(name);
        let out = noir(&[
            "simulate",
            "--network",
            path(&net),
            "--config",
            path(&cfg),
            "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        summaries.push(fs::read(out_dir.join("run_summary.json")).unwrap());

        let densities = fs::read_to_string(out_dir.join("densities.csv")).unwrap();
        assert!(densities.starts_with("step,road_id,density\n"));
        // 48 interior roads, states k = 0..=12.
        assert_eq!(densities.lines().count(), 1 + 48 * 13);
        let flows = fs::read_to_string(out_dir.join("boundary_flows.csv")).unwrap();
        assert!(flows.starts_with("step,road_id,class,flow\n"));
        assert_eq!(flows.lines().count(), 1 + 8 * 12);
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn bad_usage_is_not_reported_as_infeasible() {
    let out = noir(&["generate", "--preset", "nowhere", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
}
