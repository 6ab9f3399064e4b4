//! End-to-end checks of the command-line surface: exit codes, file
//! round trips, and byte stability of reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memberscope"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn memberscope")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn povm_check_builtins() {
    let out = run(&["povm", "check", "table1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("span dimension:        10"));
    assert!(text.contains("perturbation space:    6"));
    assert!(text.contains("informationally complete: no"));

    let out = run(&["povm", "check", "table2", "--json"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["span_dimension"], 13);
    assert_eq!(json["kernel_dimension"], 3);
    let refs = json["references"].as_array().unwrap();
    let psi_minus = refs.iter().find(|r| r["name"] == "Psi-").unwrap();
    assert_eq!(psi_minus["solvable"], false);

    let out = run(&["povm", "check", "minimal-psi-minus", "--json"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["span_dimension"], 2);
    let refs = json["references"].as_array().unwrap();
    let psi_minus = refs.iter().find(|r| r["name"] == "Psi-").unwrap();
    assert_eq!(psi_minus["solvable"], true);
}

#[test]
fn povm_check_accepts_fixture_files() {
    let out = run(&["povm", "check", fixture("table1_povm.json").to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["span_dimension"], 10);

    let out = run(&["povm", "check", fixture("table2_povm.json").to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["span_dimension"], 13);
}

#[test]
fn solve_exit_codes_and_verdicts() {
    // conclusive on preparation 1
    let out = run(&[
        "solve",
        "--data",
        fixture("prep1.json").to_str().unwrap(),
        "--povm",
        "table1",
        "--ref",
        "Psi-",
        "--eps",
        "0.5",
        "--ref",
        "Psi+",
        "--eps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdict"]["conclusive"], true);
    assert_eq!(json["verdict"]["label"], "F(Psi-) >= 0.5 && F(Psi+) < 0.5");

    // unsolvable POVM refuses with exit 1
    let out = run(&[
        "solve",
        "--data",
        fixture("prep1.json").to_str().unwrap(),
        "--povm",
        "table2",
        "--ref",
        "Psi-",
        "--eps",
        "0.5",
        "--ref",
        "Psi+",
        "--eps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot conclusively solve"));
}

#[test]
fn solve_reports_are_byte_stable() {
    let args = [
        "solve",
        "--data",
        fixture("prep2.json").to_str().unwrap(),
        "--ref",
        "Psi-",
        "--eps",
        "0.2",
        "--ref",
        "Psi+",
        "--eps",
        "0.95",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn boundary_state_is_inconclusive_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("boundary.json");
    // Werner p=0 sits exactly at overlap = 0.25 = eps^2 for eps = 0.5.
    let out = run(&[
        "simulate",
        "--state",
        "werner:0",
        "--shots",
        "0",
        "-o",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let out = run(&[
        "solve",
        "--data",
        data.to_str().unwrap(),
        "--ref",
        "Psi-",
        "--eps",
        "0.5",
        "--ref",
        "Psi+",
        "--eps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdict"]["conclusive"], false);
}

#[test]
fn simulate_round_trips_through_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.json");
    let out = run(&[
        "simulate",
        "--state",
        "werner:1.0",
        "--shots",
        "0",
        "-o",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let record = memberscope::load_experiment(&data).unwrap();
    let p = record.block_probabilities(0);
    let expect = [0.0, 0.5, 0.5, 0.0];
    for (a, b) in p.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }

    // maximally mixed: every block uniform
    let out = run(&[
        "simulate",
        "--state",
        "mixed",
        "--shots",
        "0",
        "-o",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let record = memberscope::load_experiment(&data).unwrap();
    for k in 0..record.len() {
        for q in record.block_probabilities(k) {
            assert!((q - 0.25).abs() < 1e-12);
        }
    }
}

#[test]
fn simulate_counts_mode_reaches_requested_totals() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.json");
    let out = run(&[
        "simulate",
        "--state",
        "werner:0.8",
        "--shots",
        "24000",
        "--seed",
        "7",
        "-o",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    for basis in json["bases"].as_array().unwrap() {
        let c = &basis["counts"];
        let total = c["HH"].as_u64().unwrap()
            + c["HV"].as_u64().unwrap()
            + c["VH"].as_u64().unwrap()
            + c["VV"].as_u64().unwrap();
        assert_eq!(total, 24000);
    }
    // determinism across runs with the same seed
    let rerun = dir.path().join("counts2.json");
    let out = run(&[
        "simulate",
        "--state",
        "werner:0.8",
        "--shots",
        "24000",
        "--seed",
        "7",
        "-o",
        rerun.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(&data).unwrap(),
        std::fs::read_to_string(&rerun).unwrap()
    );
}

#[test]
fn simulate_rejects_invalid_density() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad_density.json");
    std::fs::write(
        &bad,
        r#"{"re": [[1.0,0,0,0],[0,0.5,0,0],[0,0,0,0],[0,0,0,0]], "im": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#,
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--state",
        &format!("density:{}", bad.display()),
        "--shots",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_single_cell_matches_solve() {
    let out = run(&[
        "sweep",
        "--data",
        fixture("prep1.json").to_str().unwrap(),
        "--grid",
        "0.5:0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cells = json["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0]["verdict"]["label"], "F(Psi-) >= 0.5 && F(Psi+) < 0.5");
}

#[test]
fn sweep_grid_is_cartesian_and_svg_written() {
    let dir = tempfile::tempdir().unwrap();
    let svg_path = dir.path().join("partition.svg");
    let out = run(&[
        "sweep",
        "--data",
        fixture("prep1.json").to_str().unwrap(),
        "--grid",
        "0.5,0.7:0.3,0.5",
        "--svg",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cells = json["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn csv_counts_solve_path() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("counts.csv");
    // Werner(0.9)-like counts in the three standard bases.
    std::fs::write(
        &csv_path,
        "# angle_unit=pi_fractions\n\
         theta1,phi1,theta2,phi2,hh,hv,vh,vv\n\
         0,0,0,0,600,11400,11400,600\n\
         0.125,0.25,0.125,0.25,600,11400,11400,600\n\
         0.125,0,0.125,0,600,11400,11400,600\n",
    )
    .unwrap();
    let out = run(&[
        "solve",
        "--data",
        csv_path.to_str().unwrap(),
        "--ref",
        "Psi-",
        "--eps",
        "0.5",
        "--ref",
        "Psi+",
        "--eps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdict"]["label"], "F(Psi-) >= 0.5 && F(Psi+) < 0.5");
}

#[test]
fn fit_tol_env_var_is_honored() {
    // An absurdly strict tolerance forces Inconclusive on good data.
    let out = bin()
        .args([
            "solve",
            "--data",
            fixture("prep1.json").to_str().unwrap(),
            "--ref",
            "Psi-",
            "--eps",
            "0.5",
            "--ref",
            "Psi+",
            "--eps",
            "0.5",
        ])
        .env("MEMBERSCOPE_FIT_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // ...and the explicit flag takes precedence over the env var.
    let out = bin()
        .args([
            "solve",
            "--data",
            fixture("prep1.json").to_str().unwrap(),
            "--ref",
            "Psi-",
            "--eps",
            "0.5",
            "--ref",
            "Psi+",
            "--eps",
            "0.5",
            "--fit-tol",
            "1e-7",
        ])
        .env("MEMBERSCOPE_FIT_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn mismatched_ref_eps_pairs_error() {
    let out = run(&[
        "solve",
        "--data",
        fixture("prep1.json").to_str().unwrap(),
        "--ref",
        "Psi-",
        "--eps",
        "0.5",
        "--eps",
        "0.6",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
