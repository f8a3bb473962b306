use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fronttrack"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn riemann_identical_states_give_empty_fan() {
    let out = run(&["riemann", "--left", "1,0", "--right", "1,0"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], "fronttrack.riemann v1");
    assert_eq!(v["waves"].as_array().unwrap().len(), 0);
}

#[test]
fn riemann_rejects_out_of_box_state() {
    let out = run(&["riemann", "--left", "9,0", "--right", "1,0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("configuration error") && err.contains("state_box"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[engine]\ndelta = 0.1\n").unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
}

#[test]
fn evolve_matches_golden_event_log_and_is_deterministic() {
    let cfg = data("data/regression.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--quiet"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = read_dir_sorted(a.path());
    assert_eq!(fa, read_dir_sorted(b.path()));
    let golden = std::fs::read(data("golden/event_log_seed7.csv")).unwrap();
    assert_eq!(std::fs::read(a.path().join("event_log.csv")).unwrap(), golden);
    for (name, bytes) in &fa {
        let text = String::from_utf8_lossy(bytes);
        assert!(text.lines().take(3).any(|l| l.contains("schema") && l.contains("fronttrack.")), "{name} lacks a schema line");
    }
}

#[test]
fn seed_flag_changes_random_data() {
    let cfg = data("data/regression.toml");
    let a = tempfile::tempdir().unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", a.path().to_str().unwrap(), "--seed", "8", "--quiet"]);
    assert!(out.status.success());
    let golden = std::fs::read(data("golden/event_log_seed7.csv")).unwrap();
    assert_ne!(std::fs::read(a.path().join("event_log.csv")).unwrap(), golden);
}

#[test]
fn functionals_column_is_nonincreasing() {
    let cfg = data("data/regression.toml");
    let d = tempfile::tempdir().unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--quiet"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(d.path().join("functionals.csv")).unwrap();
    let lq: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert!(lq.len() > 2);
    assert!(lq.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn stability_writes_report_and_series() {
    let cfg = data("data/stability.toml");
    let d = tempfile::tempdir().unwrap();
    let out = run(&["stability", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("stability_report.json")).unwrap()).unwrap();
    assert_eq!(rep["schema"], "fronttrack.stability_report v1");
    assert_eq!(rep["hard_invariants_hold"], true);
    let series = std::fs::read_to_string(d.path().join("stability_series.csv")).unwrap();
    assert!(series.starts_with("# schema: fronttrack.stability_series v1\nt,E,L,Q,LQ,np_total,pos_D_sum,budget\n"));
}

#[test]
fn check_suites_report_structured_margins() {
    let cfg = data("data/regression.toml");
    let d = tempfile::tempdir().unwrap();
    for suite in ["weights", "conditionH"] {
        let out = run(&["check", suite, "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--quiet"]);
        assert!(out.status.success(), "{suite}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join(format!("check_{suite}.json"))).unwrap()).unwrap();
        assert_eq!(v["passed"], true);
        assert!(!v["items"].as_array().unwrap().is_empty());
    }
    let out = run(&["check", "nonsense", "--out", d.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eps_sweep_is_ordered_and_empty_sweep_fails() {
    let cfg = data("data/regression.toml");
    let d = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d.path().to_str().unwrap(),
        "--parameter",
        "eps_nu",
        "--values",
        "1e-2,1e-4,1e-6",
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.path().join("sweep_eps_nu.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec!["0.01", "0.0001", "0.000001"]);
    let np: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(np.windows(2).all(|w| w[1] <= w[0]), "{np:?}");

    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.values"));
}
