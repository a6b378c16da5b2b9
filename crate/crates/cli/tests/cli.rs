use std::path::Path;
use std::process::{Command, Output};

fn eepca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eepca"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_scenario(dir: &Path) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(
        &path,
        r#"{"n_nodes": 20, "m_field": 50.0, "e_min": 0.05, "e_max": 0.1, "frac_rda": 0.5, "frac_malfunction": 0.1}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn writes_summary_curves_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out = dir.path().join("out");
    let o = eepca(&[
        "--scenario",
        &scenario,
        "--policy",
        "eepca",
        "--seeds",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(out.join("curves/base_eepca.csv").exists());

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seeds"], serde_json::json!([0, 1, 2, 3]));
    let hash = meta["points"][0]["config_hash"].as_str().unwrap();
    for line in summary.lines().skip(1) {
        assert_eq!(line.split(',').nth(1).unwrap(), hash);
    }
    assert_eq!(meta["scenario"]["first_power_ideal_distances"], false);
}

#[test]
fn sweep_enforces_beta_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out = dir.path().join("out");
    let o = eepca(&[
        "--scenario",
        &scenario,
        "--policy",
        "eepca,leach",
        "--sweep",
        "alpha=0.5:0.9:0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    // three alpha values x two policies x one seed
    assert_eq!(summary.lines().count(), 1 + 6);
    assert!(summary.contains("alpha=0.7,"));
    assert!(out.join("curves/alpha_0.9_leach.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let read = |name: &str| {
        let out = dir.path().join(name);
        let o = eepca(&[
            "--scenario",
            &scenario,
            "--seeds",
            "3",
            "--trace",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        (
            std::fs::read(out.join("summary.csv")).unwrap(),
            std::fs::read(out.join("curves/base_sep.csv")).unwrap(),
            std::fs::read(out.join("traces/eepca_seed0.jsonl")).unwrap(),
        )
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn bad_config_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"frac_rda": 1.5}"#).unwrap();
    let o = eepca(&[
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frac_rda"));

    let o = eepca(&["--policy", "edfcm", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = eepca(&["--sweep", "alpha=", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = eepca(&["--seeds", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeds"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let scenario = small_scenario(dir.path());
    let out = blocker.join("out");
    let o = eepca(&["--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
