//! End-to-end tests of the `duio` binary and the on-disk scenario format.

use std::fs;
use std::process::{Command, Output};

use duio_cli::file::{
    ControllerSection, DesignSection, GraphSection, NodeSection, NoiseSection, PlantSection,
    ScenarioFile, SimSection,
};
use duio_cli::pipeline::load_scenario;
use duio_core::sim::SignalSpec;

fn duio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duio"))
        .args(args)
        .output()
        .expect("failed to spawn duio")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

/// A two-state plant whose single node watches a state the disturbance
/// never reaches: `C_i [B_i^u, B_w]` is identically zero, so the third
/// rank assumption must fail.
fn undecouplable_scenario() -> ScenarioFile {
    ScenarioFile {
        plant: PlantSection {
            a: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            b: vec![vec![1.0], vec![0.0]],
            b_w: vec![vec![1.0], vec![0.0]],
            t_c: 1.0,
        },
        nodes: vec![NodeSection {
            c: vec![vec![0.0, 1.0]],
            known_input_columns: vec![0],
        }],
        graph: GraphSection {
            m: 1,
            edges: vec![],
        },
        noise: NoiseSection {
            scalar: Some(0.0),
            covariance: None,
        },
        unknown_input: SignalSpec::Zero,
        controller: ControllerSection {
            lqr: None,
            x_ref: vec![0.0, 0.0],
        },
        sim: SimSection {
            horizon: 10,
            seed: 0,
            x0: vec![1.0, 0.0],
        },
        design: DesignSection::default(),
    }
}

#[test]
fn check_passes_on_a_builtin() {
    let out = duio(&["check", "example1-ring5"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for i in 0..5 {
        assert!(text.contains(&format!("node {i}: PASS")), "{text}");
    }
}

#[test]
fn check_exits_2_when_an_assumption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("undecouplable.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&undecouplable_scenario()).unwrap(),
    )
    .unwrap();

    let out = duio(&["check", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).contains("node 0: FAIL"), "{}", stdout(&out));
    assert!(
        stderr(&out).contains("rank(C_i [B_i^u, B_w]) is column-deficient"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_scenario_exits_1_and_lists_builtins() {
    let out = duio(&["design", "no-such-scenario"]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("example1-ring5"), "{err}");
    assert!(err.contains("heatx-ring4"), "{err}");
}

#[test]
fn design_emits_a_machine_readable_report() {
    let out = duio(&["design", "example1-ring5"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["scenario"], "example1-ring5");
    assert_eq!(report["method"], "hinf");
    assert_eq!(report["decomposition"], "detectability");
    assert_eq!(report["g"].as_array().unwrap().len(), 5);
    assert_eq!(report["nodes"].as_array().unwrap().len(), 5);
    assert!(report["beta_u"].as_f64().unwrap() < 0.0);
    assert!(report["rho_overall"].as_f64().unwrap() < 1.0);
    assert_eq!(report["stable"], true);
}

#[test]
fn poles_flag_forces_the_fallback_method() {
    let out = duio(&["design", "example1-ring5", "--poles", "0.2,0.25,0.3,0.35,0.4"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["method"], "pole-placement");
    assert!(report["rho_overall"].as_f64().unwrap() < 1.0);
}

#[test]
fn decompose_reports_matching_subspace_dimensions() {
    let out = duio(&["decompose", "heatx-ring4"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let undetectable: Vec<u64> = rows
        .iter()
        .map(|r| r["undetectable_dimension"].as_u64().unwrap())
        .collect();
    assert_eq!(undetectable, vec![6, 6, 6, 5]);
    for row in rows {
        assert_eq!(row["mode"], "observability");
        assert!(row["triangular_residual"].as_f64().unwrap() < 1e-10);
        assert!(row["output_blindness_residual"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn simulate_writes_trace_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = duio(&[
        "simulate",
        "example1-ring5",
        "--no-noise",
        "--no-disturbance",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("converged at k ="), "{}", stdout(&out));

    let csv = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,node,err_norm,x_hat_0,x_hat_1,x_hat_2,x_hat_3,x_hat_4,x_hat_5"
    );
    // 601 recorded steps, one row per node each.
    assert_eq!(csv.lines().count(), 1 + 601 * 5);
    // With noise and disturbance silenced every node ends converged.
    for line in csv.lines().rev().take(5) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "600");
        let err: f64 = fields[2].parse().unwrap();
        assert!(err <= 1e-6, "final error {err} on line {line}");
    }

    let gp = fs::read_to_string(out_dir.join("trace.gp")).unwrap();
    assert!(gp.contains("logscale"));
    assert!(gp.contains("trace.csv"));
    assert!(gp.contains("[n=0:4]"));

    let design: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("design.json")).unwrap()).unwrap();
    assert_eq!(design["stable"], true);
}

#[test]
fn simulate_streams_csv_to_stdout_and_honours_overrides() {
    let out = duio(&["simulate", "example1-ring5", "--no-noise", "--horizon", "5"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    // Header plus (horizon + 1) steps x 5 nodes.
    assert_eq!(text.lines().count(), 1 + 6 * 5);
    assert!(text.starts_with("k,node,err_norm,"));
}

#[test]
fn report_prints_the_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let out = duio(&[
        "report",
        "example1-ring5",
        "--no-noise",
        "--no-disturbance",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("node  rms(last 10%)"), "{text}");
    assert!(text.contains("converged at k ="), "{text}");

    let payload: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(payload["design"]["stable"], true);
    assert!(payload["summary"]["convergence_step"].is_u64());
}

#[test]
fn scenario_files_round_trip_through_disk() {
    let original = load_scenario("example1-ring5").unwrap();
    let file = ScenarioFile::from_scenario(&original.scenario, &original.options);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.json");
    fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();

    let reloaded = load_scenario(path.to_str().unwrap()).unwrap();
    assert_eq!(reloaded.scenario, original.scenario);
    assert_eq!(reloaded.options, original.options);
    // Reference gains are a property of the built-ins, not of the format.
    assert_eq!(reloaded.reference_g, None);
}

#[test]
fn ragged_matrix_rows_name_the_offending_field() {
    let mut file = undecouplable_scenario();
    file.nodes[0].c = vec![vec![0.0, 1.0], vec![1.0]];

    let err = file.into_scenario().unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("nodes[0].c"), "{msg}");
    assert!(msg.contains("row 1 has 1 entries, expected 2"), "{msg}");
}
