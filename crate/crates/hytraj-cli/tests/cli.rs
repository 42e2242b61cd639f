//! End-to-end command tests: config schema, round-trips, CSV layout,
//! determinism and process exit codes.

use std::path::Path;
use std::process::Command;

use hytraj_cli::commands::{bundled_configs, cmd_certify, cmd_simulate, cmd_track};
use hytraj_cli::config::ScenarioConfig;

fn ball_config() -> ScenarioConfig {
    let (_, toml) = &bundled_configs()[0];
    toml::from_str(toml).unwrap()
}

fn oscillator_config() -> ScenarioConfig {
    let (_, toml) = &bundled_configs()[1];
    toml::from_str(toml).unwrap()
}

#[test]
fn bundled_configs_match_checked_in_files() {
    for (name, toml) in bundled_configs() {
        let path = format!(
            "{}/../../configs/{}.toml",
            env!("CARGO_MANIFEST_DIR"),
            name.replace('-', "_")
        );
        let on_disk = std::fs::read_to_string(&path).expect("bundled config present");
        assert_eq!(on_disk, toml, "stale bundled config {path}");
    }
}

#[test]
fn scenario_round_trips_bit_exactly() {
    for (_, toml) in bundled_configs() {
        let config: ScenarioConfig = toml::from_str(&toml).unwrap();
        let scenario = config.to_scenario().unwrap();
        let back = ScenarioConfig::from_scenario(&scenario);
        let reparsed: ScenarioConfig = toml::from_str(&back.to_toml_string()).unwrap();
        let scenario2 = reparsed.to_scenario().unwrap();
        // Bitwise identity of every numeric field that feeds computation.
        assert_eq!(scenario.system, scenario2.system);
        assert_eq!(scenario.design, scenario2.design);
        assert_eq!(scenario.gains.c0, scenario2.gains.c0);
        assert_eq!(scenario.u_ff, scenario2.u_ff);
        assert_eq!(scenario.geometry, scenario2.geometry);
        assert_eq!(scenario.x_d0, scenario2.x_d0);
        assert_eq!(scenario.horizon, scenario2.horizon);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let (_, toml) = &bundled_configs()[0];
    let with_extra = format!("{toml}\n[surprise]\nvalue = 1\n");
    let err = toml::from_str::<ScenarioConfig>(&with_extra).unwrap_err();
    assert!(err.to_string().contains("surprise"), "{err}");
}

#[test]
fn malformed_matrix_dimension_names_the_key() {
    let mut config = ball_config();
    config.design.p0 = vec![vec![1.0, 0.0, 3.0], vec![0.0, 1.0, 3.0]];
    let err = config.to_scenario().unwrap_err();
    assert!(err.to_string().contains("design.p0"), "{err}");
}

#[test]
fn zero_horizon_simulation_yields_single_row() {
    let mut config = ball_config();
    config.run.horizon = 0.0;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_simulate(&config, dir.path()).unwrap();
    assert_eq!(report.jump_count, 0);
    let csv = std::fs::read_to_string(dir.path().join("bouncing-ball/reference.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "header plus one row: {csv}");
    assert_eq!(lines[0], "t,j,x1,x2");
}

#[test]
fn jump_rows_are_duplicated_with_incremented_counter() {
    let mut config = ball_config();
    config.run.horizon = 3.0;
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&config, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("bouncing-ball/reference.csv")).unwrap();
    let rows: Vec<(f64, usize)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            let t: f64 = it.next().unwrap().parse().unwrap();
            let j: usize = it.next().unwrap().parse().unwrap();
            (t, j)
        })
        .collect();
    let jump_pairs = rows
        .windows(2)
        .filter(|w| w[0].0 == w[1].0 && w[1].1 == w[0].1 + 1)
        .count();
    assert_eq!(jump_pairs, 1, "one impact inside 3 s");
}

#[test]
fn certify_reports_expected_cases() {
    let dir = tempfile::tempdir().unwrap();
    let ball = cmd_certify(&ball_config(), dir.path()).unwrap();
    assert_eq!(ball.verdict, "Case1");
    assert!(ball.feasible);
    assert!(dir.path().join("bouncing-ball/report.json").exists());

    let osc = cmd_certify(&oscillator_config(), dir.path()).unwrap();
    assert_eq!(osc.verdict, "Case3");
    assert!(osc.feasible);
    let dwell = osc.dwell.expect("oscillator certifies with a dwell spec");
    assert!(dwell.margin >= 0.0);
    assert!(dwell.reference_jumps >= 5);
}

#[test]
fn perturbed_jump_map_is_infeasible() {
    let mut config = ball_config();
    for row in &mut config.system.l {
        for v in row {
            *v *= 1.5;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_certify(&config, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    // The report is still written, with the failing margin recorded.
    let report = std::fs::read_to_string(dir.path().join("bouncing-ball/report.txt")).unwrap();
    assert!(report.contains("feasible: false"));
}

#[test]
fn track_outputs_are_deterministic() {
    let mut config = ball_config();
    config.run.horizon = 5.0;
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    cmd_track(&config, dir_a.path()).unwrap();
    cmd_track(&config, dir_b.path()).unwrap();
    for name in [
        "euclidean_error.csv",
        "distance_d.csv",
        "lyapunov_v.csv",
        "control_u.csv",
        "region.csv",
        "track_report.json",
    ] {
        let a = std::fs::read(dir_a.path().join("bouncing-ball").join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join("bouncing-ball").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
        assert!(!a.is_empty());
    }
}

#[test]
fn certify_reports_are_reproducible() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    cmd_certify(&oscillator_config(), dir_a.path()).unwrap();
    cmd_certify(&oscillator_config(), dir_b.path()).unwrap();
    let a = std::fs::read(dir_a.path().join("dissipative-oscillator/report.json")).unwrap();
    let b = std::fs::read(dir_b.path().join("dissipative-oscillator/report.json")).unwrap();
    assert_eq!(a, b, "certificate margins must reproduce exactly");
}

#[test]
fn figures_regenerate_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let started = std::time::Instant::now();
    let files = hytraj_cli::commands::cmd_figures(dir.path()).unwrap();
    assert!(files.len() >= 10);
    let snapshot: Vec<(String, Vec<u8>)> = files
        .iter()
        .map(|f| (f.clone(), std::fs::read(dir.path().join(f)).unwrap()))
        .collect();
    // Deleting the output directory and re-running restores identical bytes.
    std::fs::remove_dir_all(dir.path().join("figures")).unwrap();
    let again = hytraj_cli::commands::cmd_figures(dir.path()).unwrap();
    assert_eq!(files, again);
    for (name, bytes) in snapshot {
        let fresh = std::fs::read(dir.path().join(&name)).unwrap();
        assert_eq!(bytes, fresh, "{name} differs across regenerations");
    }
    assert!(started.elapsed().as_secs() < 60);
}

fn run_binary(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hytraj"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes_match_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("ball.toml");
    std::fs::write(&config_path, &bundled_configs()[0].1).unwrap();

    // 0: success on a fast certify.
    let out = run_binary(
        &["certify", "--config", "ball.toml", "--out", "out"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // 2: config error (missing file, and also malformed content).
    let out = run_binary(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("broken.toml"), "name = 3").unwrap();
    let out = run_binary(&["simulate", "--config", "broken.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // 3: infeasible certificate (expanding jump map).
    let mut bad = ball_config();
    for row in &mut bad.system.l {
        for v in row {
            *v *= 1.5;
        }
    }
    std::fs::write(dir.path().join("bad.toml"), bad.to_toml_string()).unwrap();
    let out = run_binary(&["certify", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // 4: abnormal simulation (escape bound under the initial state norm).
    let out = run_binary(
        &[
            "simulate",
            "--config",
            "ball.toml",
            "--tol-override",
            "escape_bound=5.0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn tolerance_override_rejects_unknown_keys() {
    let mut config = ball_config();
    assert!(config.override_tolerance("rel_tol", "1e-8").is_ok());
    assert_eq!(config.tolerances.rel_tol, 1e-8);
    assert!(config.override_tolerance("nonsense", "1").is_err());
    assert!(config.override_tolerance("rel_tol", "abc").is_err());
}
