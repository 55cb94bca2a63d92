//! End-to-end tests against the compiled binary: artifact sets, exit codes,
//! warnings, and byte-stable reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coarsen_core::meshgen::jittered_grid;
use coarsen_core::meshops::{cotan_laplacian, lumped_mass, save_obj};
use coarsen_core::sparsemat::{SymPattern, SymSparse};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opcoarsen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// A 6x6 jittered grid written as OBJ; small enough that solves are instant.
fn grid_obj(dir: &Path) -> PathBuf {
    let mesh = jittered_grid(6, 6, 3);
    let path = dir.join("grid.obj");
    save_obj(&mesh, &path).unwrap();
    path
}

fn coarsen_grid(dir: &Path, out: &str, eigs: &str, extra: &[&str]) -> Output {
    let mesh = grid_obj(dir);
    let out_dir = dir.join(out);
    let mut args = vec![
        "coarsen".to_string(),
        "--mesh".into(),
        mesh.display().to_string(),
        "--coarse".into(),
        "8".into(),
        "--eigs".into(),
        eigs.to_string(),
        "--out".into(),
        out_dir.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    run(&refs)
}

const ARTIFACTS: &[&str] = &[
    "L.mtx",
    "M.mtx",
    "X.mtx",
    "Mtilde.mtx",
    "R.json",
    "report.json",
    "trace.csv",
    "timings.json",
    "metrics.json",
    "eigenvalue_errors.csv",
    "functional_map.mtx",
];

#[test]
fn coarsen_writes_all_artifacts_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let output = coarsen_grid(dir.path(), "out", "6", &[]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let out = dir.path().join("out");
    for name in ARTIFACTS {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["norm_L"].as_f64().unwrap().is_finite());
    assert!(metrics["norm_D"].as_f64().unwrap().is_finite());
    assert_eq!(metrics["k"].as_u64().unwrap(), 6);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "converged");
    // The coarse operator really has 8 vertices.
    let x = SymSparse::mm_read(out.join("X.mtx")).unwrap();
    assert_eq!(x.n(), 8);
}

#[test]
fn iteration_cap_exits_two_but_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let output = coarsen_grid(dir.path(), "out", "6", &["--max-iter", "2"]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    let out = dir.path().join("out");
    for name in ARTIFACTS {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "max_iterations");
}

#[test]
fn oversized_coarse_count_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = grid_obj(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "coarsen",
        "--mesh",
        &mesh.display().to_string(),
        "--coarse",
        "36",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("must be below"));
}

#[test]
fn out_of_range_rings_fail() {
    let dir = tempfile::tempdir().unwrap();
    let output = coarsen_grid(dir.path(), "out", "6", &["--rings", "4"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("rings"));
}

#[test]
fn weighted_with_few_modes_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    // eigs 3 < 8 / 2: warned, not fatal.
    let output = coarsen_grid(
        dir.path(),
        "out",
        "3",
        &["--weighted", "--max-iter", "2000"],
    );
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("warning: weighted energy"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = grid_obj(dir.path());
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"coarse": 8, "eigs": 6, "seed": 1}"#).unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "coarsen",
        "--config",
        &config.display().to_string(),
        "--mesh",
        &mesh.display().to_string(),
        "--coarse",
        "9",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("R.json")).unwrap()).unwrap();
    assert_eq!(r["samples"].as_array().unwrap().len(), 9);
}

#[test]
fn reruns_write_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let first = coarsen_grid(dir.path(), "a", "6", &["--seed", "5"]);
    let second = coarsen_grid(dir.path(), "b", "6", &["--seed", "5"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr_of(&first));
    assert_eq!(second.status.code(), Some(0), "{}", stderr_of(&second));
    for name in ARTIFACTS {
        if *name == "timings.json" {
            continue; // wall clock, intentionally unstable
        }
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

/// Writes L, M, X = L, Mtilde = M, and an identity restriction for the grid.
fn identity_file_set(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let mesh = jittered_grid(6, 6, 3);
    let l = cotan_laplacian(&mesh).unwrap();
    let mass = lumped_mass(&mesh).unwrap();
    let n = l.n();
    let l_path = dir.join("L.mtx");
    l.mm_write(&l_path).unwrap();
    let m_path = dir.join("M.mtx");
    SymSparse::new(SymPattern::diagonal(n), mass)
        .unwrap()
        .mm_write(&m_path)
        .unwrap();
    let r_path = dir.join("R.json");
    let samples: Vec<usize> = (0..n).collect();
    std::fs::write(
        &r_path,
        serde_json::to_string(&serde_json::json!({ "samples": samples, "n_fine": n })).unwrap(),
    )
    .unwrap();
    (l_path, m_path, r_path)
}

#[test]
fn eval_identity_set_reports_near_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let (l_path, m_path, r_path) = identity_file_set(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "eval",
        "--fine-l",
        &l_path.display().to_string(),
        "--fine-m",
        &m_path.display().to_string(),
        "--coarse-l",
        &l_path.display().to_string(),
        "--coarse-m",
        &m_path.display().to_string(),
        "--restriction",
        &r_path.display().to_string(),
        "--eigs",
        "8",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["norm_L"].as_f64().unwrap() <= 1e-7);
    assert!(metrics["norm_D"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn eval_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let (l_path, m_path, r_path) = identity_file_set(dir.path());
    // Claim one fewer fine vertex than the operator has.
    std::fs::write(
        &r_path,
        serde_json::to_string(&serde_json::json!({
            "samples": (0..35).collect::<Vec<usize>>(),
            "n_fine": 35,
        }))
        .unwrap(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "eval",
        "--fine-l",
        &l_path.display().to_string(),
        "--fine-m",
        &m_path.display().to_string(),
        "--coarse-l",
        &l_path.display().to_string(),
        "--coarse-m",
        &m_path.display().to_string(),
        "--restriction",
        &r_path.display().to_string(),
        "--eigs",
        "8",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("restriction"));
}

#[test]
fn chordal_info_counts_cycle_fill() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = SymPattern::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let values = vec![1.0; pattern.entries().len()];
    let path = dir.path().join("c4.mtx");
    SymSparse::new(pattern, values)
        .unwrap()
        .mm_write(&path)
        .unwrap();
    let output = run(&["chordal-info", "--pattern", &path.display().to_string()]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let info: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    // A 4-cycle is not chordal and needs exactly one chord.
    assert_eq!(info["is_chordal"], false);
    assert_eq!(info["pattern_edges"], 4);
    assert_eq!(info["fill_edges"], 1);
}

#[test]
fn chordal_info_sees_complete_graph_as_one_clique() {
    let dir = tempfile::tempdir().unwrap();
    let edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let pattern = SymPattern::from_edges(4, edges).unwrap();
    let values = vec![1.0; pattern.entries().len()];
    let path = dir.path().join("k4.mtx");
    SymSparse::new(pattern, values)
        .unwrap()
        .mm_write(&path)
        .unwrap();
    let report_path = dir.path().join("info.json");
    let output = run(&[
        "chordal-info",
        "--pattern",
        &path.display().to_string(),
        "--out",
        &report_path.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let info: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(info["is_chordal"], true);
    assert_eq!(info["fill_edges"], 0);
    assert_eq!(info["cliques"]["count"], 1);
    assert_eq!(info["cliques"]["size_max"], 4);
}

#[test]
fn chordal_info_from_mesh_rings() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = grid_obj(dir.path());
    let output = run(&[
        "chordal-info",
        "--mesh",
        &mesh.display().to_string(),
        "--rings",
        "2",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let info: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    assert_eq!(info["n"], 36);
    assert!(info["pattern_edges"].as_u64().unwrap() > 0);
}
