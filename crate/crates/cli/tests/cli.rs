//! End-to-end tests of the command-line interface: exit codes, file
//! formats, and cross-command consistency.

mod common;

use common::*;

use agepop::model::default_validation_grid;
use agepop::{
    moments_from_density, net_reproduction_rate, nontrivial_equilibrium, QuadratureSettings,
};

fn config_arg(path: &std::path::Path) -> String {
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &std::path::Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
        .lines()
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}

fn read_json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_reference_scenario_passes() {
    let dir = scratch_dir("validate-pass");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "validate",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let report = read_json(&dir.join("validation.json"));
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
}

#[test]
fn validate_constant_mortality_exits_three_listing_cmd() {
    let dir = scratch_dir("validate-cmd");
    let scenario = reference_scenario_json(1.0).replace(
        r#""family": "power_law", "base": 1.0, "scale": 1.0, "exponent": 2.0"#,
        r#""family": "power_law", "base": 0.5, "scale": 0.5, "exponent": 0.0"#,
    );
    let config = write_scenario(&dir, "scenario.json", &scenario);
    let out = run_cli(&[
        "validate",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 3);
    assert!(out.stdout.contains("(cmd)"), "stdout: {}", out.stdout);
    let report = read_json(&dir.join("validation.json"));
    assert_eq!(report["passed"], serde_json::Value::Bool(false));
    let conditions: Vec<&str> = report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["condition"].as_str().unwrap())
        .collect();
    assert!(conditions.contains(&"cmd"));
}

#[test]
fn malformed_json_exits_two() {
    let dir = scratch_dir("malformed");
    let config = write_scenario(&dir, "scenario.json", "{ not json");
    let out = run_cli(&["validate", "--config", &config_arg(&config)]);
    assert_eq!(out.code, 2);
}

#[test]
fn unknown_field_reports_path_and_exits_two() {
    let dir = scratch_dir("unknown-field");
    let scenario = reference_scenario_json(1.0).replace(r#""n": 1,"#, r#""n": 1, "typo": 3,"#);
    let config = write_scenario(&dir, "scenario.json", &scenario);
    let out = run_cli(&["validate", "--config", &config_arg(&config)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("model"), "stderr: {}", out.stderr);
}

#[test]
fn mismatched_coefficient_count_exits_two() {
    let dir = scratch_dir("coeff-count");
    let scenario = reference_scenario_json(1.0).replace(r#""n": 1,"#, r#""n": 2,"#);
    let config = write_scenario(&dir, "scenario.json", &scenario);
    let out = run_cli(&["validate", "--config", &config_arg(&config)]);
    assert_eq!(out.code, 2);
    assert!(
        out.stderr.contains("fertility.coeffs"),
        "stderr: {}",
        out.stderr
    );
}

#[test]
fn negative_decay_exits_two() {
    let dir = scratch_dir("neg-rho");
    let scenario = reference_scenario_json(1.0).replace(r#""rho": 2.0"#, r#""rho": -1.0"#);
    let config = write_scenario(&dir, "scenario.json", &scenario);
    let out = run_cli(&["validate", "--config", &config_arg(&config)]);
    assert_eq!(out.code, 2);
}

#[test]
fn equilibrium_reference_is_trivial_subcritical() {
    let dir = scratch_dir("equilibrium-ref");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "equilibrium",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    let report = read_json(&dir.join("equilibrium.json"));
    assert_eq!(report["regime"], "Subcritical");
    assert!((report["r0"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert_eq!(report["p_star"].as_f64().unwrap(), 0.0);
    for m in report["moments_star"].as_array().unwrap() {
        assert_eq!(m.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn equilibrium_doubled_fertility_matches_core() {
    let dir = scratch_dir("equilibrium-x2");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(2.0));
    let out = run_cli(&[
        "equilibrium",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    let report = read_json(&dir.join("equilibrium.json"));
    let expected = nontrivial_equilibrium(&reference_model(2.0)).unwrap();
    let p_star = report["p_star"].as_f64().unwrap();
    assert_eq!(p_star, expected.total);
    assert!((p_star - 0.420).abs() < 1e-3);
    assert!(report["residual_inf_norm"].as_f64().unwrap() <= 1e-8 * (1.0 + p_star));
}

#[test]
fn equilibrium_critical_scenario_reports_no_nontrivial_state() {
    // Scaling the reference fertility by 1.2 lands exactly on R0 = 1.
    let dir = scratch_dir("equilibrium-critical");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.2));
    let out = run_cli(&[
        "equilibrium",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    let report = read_json(&dir.join("equilibrium.json"));
    assert_eq!(report["regime"], "Critical");
    assert!((report["r0"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert_eq!(report["p_star"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_reference_goes_extinct_with_exact_columns() {
    let dir = scratch_dir("simulate-ref");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "simulate",
        "--config",
        &config_arg(&config),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let rows = read_csv(&dir.join("simulate.csv"));
    assert_eq!(rows[0], vec!["t", "P", "P0", "P1", "B", "Rn_of_P", "M"]);

    let first: Vec<f64> = rows[1].iter().map(|c| c.parse().unwrap()).collect();
    assert!((first[0] - 0.0).abs() < 1e-15);
    assert!((first[5] - 0.195436).abs() < 1e-5);

    let last: Vec<f64> = rows
        .last()
        .unwrap()
        .iter()
        .map(|c| c.parse().unwrap())
        .collect();
    assert!(last[1] < 1e-8, "final P = {}", last[1]);
    assert!((last[5] - 5.0 / 6.0).abs() < 1e-3);

    // R_n(P(t)) increases as the population decays.
    let mut prev = first[5];
    for row in &rows[2..] {
        let rn: f64 = row[5].parse().unwrap();
        assert!(rn >= prev - 1e-12, "Rn_of_P not increasing: {rn} < {prev}");
        prev = rn;
    }

    let monitors = read_json(&dir.join("monitors.json"));
    assert_eq!(monitors["positivity"]["conclusion_held"], true);
    assert_eq!(monitors["ordering_chain"]["hypothesis_held"], true);
    assert_eq!(monitors["ordering_chain"]["conclusion_held"], true);
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = scratch_dir("simulate-det");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let result = run_cli(&[
            "simulate",
            "--config",
            &config_arg(&config),
            "--t-end",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(result.code, 0);
    }
    let a = std::fs::read(out_a.join("simulate.csv")).unwrap();
    let b = std::fs::read(out_b.join("simulate.csv")).unwrap();
    assert_eq!(a, b, "simulate.csv differs between identical runs");
}

#[test]
fn simulate_zero_horizon_emits_single_row() {
    let dir = scratch_dir("simulate-zero");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "simulate",
        "--config",
        &config_arg(&config),
        "--t-end",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    let rows = read_csv(&dir.join("simulate.csv"));
    assert_eq!(rows.len(), 2);
    let init = moments_from_density(
        &reference_density(),
        &reference_model(1.0),
        &QuadratureSettings::default(),
    )
    .unwrap()
    .state;
    let p: f64 = rows[1][1].parse().unwrap();
    assert_eq!(p, init.total);
}

#[test]
fn simulate_from_equilibrium_stays_there() {
    // Start the doubled-fertility model at its stationary age profile
    // p*(a) = B* e^{-mu(P*) a}; every CSV row must stay near equilibrium.
    let model = reference_model(2.0);
    let eq = nontrivial_equilibrium(&model).unwrap();
    let mu_star = model.eval_mu(eq.total);
    let births_star = mu_star * eq.total;
    let dir = scratch_dir("simulate-eq");
    let scenario = reference_scenario_json(2.0).replace(
        r#""density": { "family": "exp_decay", "scale": 1.0, "rate": 1.0 }"#,
        &format!(
            r#""density": {{ "family": "exp_decay", "scale": {births_star}, "rate": {mu_star} }}"#
        ),
    );
    let config = write_scenario(&dir, "scenario.json", &scenario);
    let out = run_cli(&[
        "simulate",
        "--config",
        &config_arg(&config),
        "--t-end",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0);
    let rows = read_csv(&dir.join("simulate.csv"));
    for row in &rows[1..] {
        let p: f64 = row[1].parse().unwrap();
        assert!((p - eq.total).abs() < 1e-6, "P = {p} vs P* = {}", eq.total);
    }
}

#[test]
fn reconstruct_at_time_zero_reproduces_the_density() {
    let dir = scratch_dir("reconstruct-zero");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "reconstruct",
        "--config",
        &config_arg(&config),
        "--times",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let rows = read_csv(&dir.join("reconstruct_t0.csv"));
    assert_eq!(rows[0], vec!["a", "p", "phi"]);
    let density = reference_density();
    for row in rows[1..].iter().skip(1) {
        let a: f64 = row[0].parse().unwrap();
        let p: f64 = row[1].parse().unwrap();
        assert_eq!(p, density.eval(a), "age {a}");
    }
}

#[test]
fn reconstruct_beyond_horizon_exits_four() {
    let dir = scratch_dir("reconstruct-range");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "reconstruct",
        "--config",
        &config_arg(&config),
        "--times",
        "150",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 4, "stderr: {}", out.stderr);
}

#[test]
fn sweep_crosses_the_threshold() {
    let dir = scratch_dir("sweep");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "sweep",
        "--config",
        &config_arg(&config),
        "--values",
        "0.5,1.0,1.2,2.0",
        "--t-end",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let rows = read_csv(&dir.join("sweep.csv"));
    assert_eq!(
        rows[0],
        vec!["value", "R0", "regime", "P_star", "P_at_t_end"]
    );
    let expected_r0 = [5.0 / 12.0, 5.0 / 6.0, 1.0, 5.0 / 3.0];
    for (row, expected) in rows[1..].iter().zip(expected_r0) {
        let r0: f64 = row[1].parse().unwrap();
        assert!((r0 - expected).abs() < 1e-12, "{r0} vs {expected}");
    }
    assert_eq!(rows[1][3], "");
    assert_eq!(rows[2][3], "");
    assert_eq!(rows[3][3], "");
    let p_star: f64 = rows[4][3].parse().unwrap();
    let expected = nontrivial_equilibrium(&reference_model(2.0)).unwrap().total;
    assert_eq!(p_star, expected);
}

#[test]
fn sweep_without_values_exits_two() {
    let dir = scratch_dir("sweep-empty");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "sweep",
        "--config",
        &config_arg(&config),
        "--values",
        "",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 2);
}

#[test]
fn compare_verdict_holds_for_reference_and_doubled() {
    for scale in [1.0, 2.0] {
        let dir = scratch_dir(&format!("compare-{scale}"));
        let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(scale));
        let out = run_cli(&[
            "compare",
            "--config",
            &config_arg(&config),
            "--t-end",
            "50",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.code, 0, "stderr: {}", out.stderr);
        let verdict = read_json(&dir.join("compare.json"));
        assert_eq!(verdict["holds"], true, "scale {scale}");
        let rows = read_csv(&dir.join("compare.csv"));
        assert_eq!(rows[0], vec!["t", "P", "P_bar"]);
        assert!(rows.len() > 2);
    }
}

#[test]
fn oracle_pde_tracks_and_rejects_misaligned_steps() {
    let dir = scratch_dir("oracle");
    let config = write_scenario(&dir, "scenario.json", &reference_scenario_json(1.0));
    let out = run_cli(&[
        "oracle-pde",
        "--config",
        &config_arg(&config),
        "--dt",
        "0.01",
        "--t-end",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let rows = read_csv(&dir.join("oracle_pde.csv"));
    assert_eq!(rows[0], vec!["t", "P_ode", "P_pde", "rel_err"]);
    let max_rel = rows[1..]
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    assert!(max_rel < 0.01, "max rel {max_rel}");

    let misaligned = run_cli(&[
        "oracle-pde",
        "--config",
        &config_arg(&config),
        "--dt",
        "0.013",
        "--t-end",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(misaligned.code, 2, "stderr: {}", misaligned.stderr);
}

#[test]
fn validate_output_is_consistent_with_core_grid() {
    // The CLI validates on the default grid; the core API must agree.
    let model = reference_model(1.0);
    assert!(
        model
            .validate_assumptions(&default_validation_grid())
            .passed
    );
    let r0 = net_reproduction_rate(&model, 0.0);
    assert!(r0 < 1.0);
}
