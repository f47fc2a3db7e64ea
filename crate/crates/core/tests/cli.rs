use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpopf::formulation::{cost_vector, DemandScenario, FormulationOptions, QpData};
use mpopf::grid::{builtin_case, Network};
use mpopf::solver::{ConvexProgram, InteriorPointSolver, LP_REGULARIZATION};
use nalgebra::DMatrix;

fn mpopf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpopf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_data(run_dir: &Path, k: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "--run-dir",
        path(run_dir),
        "gen-data",
        "--case",
        "toy3",
        "--k",
        k,
        "--horizon",
        "4",
        "--seed",
        "3",
    ];
    args.extend_from_slice(extra);
    mpopf(&args)
}

fn dataset_files(dir: &Path) -> Vec<Vec<u8>> {
    ["demand.csv", "manifest.json", "labels.csv"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

fn solve_demand(case: &str, rows: &str) -> (tempfile::TempDir, Output) {
    let tmp = tempfile::tempdir().unwrap();
    let demand = tmp.path().join("demand.csv");
    fs::write(&demand, rows).unwrap();
    let run = tmp.path().join("run");
    let out = mpopf(&[
        "--run-dir",
        path(&run),
        "solve",
        "--case",
        case,
        "--demand",
        path(&demand),
    ]);
    (tmp, out)
}

/// Rows of the printed dispatch table, header excluded.
fn dispatch_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip_while(|l| !l.starts_with("hour"))
        .skip(1)
        .take_while(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn printed_cost(text: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix("cost "))
        .expect("cost line")
        .parse()
        .unwrap()
}

#[test]
fn missing_case_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mpopf(&[
        "--run-dir",
        path(tmp.path()),
        "gen-data",
        "--case",
        "/no/such/case.toml",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/case.toml"));
}

#[test]
fn gen_data_is_byte_identical_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    assert!(gen_data(&a, "6", &[]).status.success());
    assert!(gen_data(&b, "6", &[]).status.success());
    assert_eq!(dataset_files(&a), dataset_files(&b));

    let manifest = a.join("run_manifest.json");
    let out = mpopf(&["--run-dir", path(&c), "replay", path(&manifest)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(dataset_files(&a), dataset_files(&c));
    let recorded: serde_json::Value =
        serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    let replayed: serde_json::Value =
        serde_json::from_slice(&fs::read(c.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(recorded["config"], replayed["config"]);
    assert_eq!(recorded["case_fingerprint"], replayed["case_fingerprint"]);
}

#[test]
fn command_line_overrides_config_file_over_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "[gen_data]\ncase = \"toy3\"\nk = 5\nhorizon = 3\nseed = 4\n",
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = mpopf(&[
        "--config",
        path(&config),
        "--run-dir",
        path(&run),
        "gen-data",
        "--k",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("run_manifest.json")).unwrap()).unwrap();
    let cfg = &manifest["config"];
    assert_eq!(cfg["k"], 4);
    assert_eq!(cfg["horizon"], 3);
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["noise"], 0.1);
    assert_eq!(manifest["seed"], 4);

    fs::write(&config, "[gen_data]\nbogus = 1\n").unwrap();
    let out = mpopf(&[
        "--config",
        path(&config),
        "--run-dir",
        path(&run),
        "gen-data",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_prints_the_optimal_dispatch() {
    let (_tmp, out) = solve_demand("toy3", "60\n95\n70\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("1/1 scenarios solved"));
    let rows = dispatch_rows(&text);
    assert_eq!(rows.len(), 3);

    let net = Network::new(builtin_case("toy3").unwrap()).unwrap();
    let sc = DemandScenario::new(DMatrix::from_row_slice(1, 3, &[60.0, 95.0, 70.0])).unwrap();
    let qp = QpData::build(&net, &sc, FormulationOptions::default()).unwrap();
    let cost = cost_vector(&net.case, &qp.layout, 0);
    let lp = ConvexProgram::dispatch(&qp, &cost, LP_REGULARIZATION);
    let sol = InteriorPointSolver::default().solve(&lp, None).unwrap();
    let expected: f64 = cost.iter().zip(&sol.x_star).map(|(c, x)| c * x).sum();
    assert!((printed_cost(&text) - expected).abs() < 1e-4 * expected);
    for (t, (row, d)) in rows.iter().zip([60.0, 95.0, 70.0]).enumerate() {
        assert_eq!(row[0], (t + 1) as f64);
        // gen0 + gen1 - ch + dis covers the load
        assert!(
            (row[1] + row[2] - row[3] + row[4] - d).abs() < 1e-3,
            "{row:?}"
        );
        for (k, v) in row[1..5].iter().enumerate() {
            assert!((v - sol.x_star[4 * t + k]).abs() < 1e-3);
        }
    }
}

#[test]
fn zero_demand_dispatches_nothing() {
    let (_tmp, out) = solve_demand("toy_storage", "0\n0\n0\n0\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(printed_cost(&text).abs() < 1e-6);
    for row in dispatch_rows(&text) {
        // every power column is zero; SoC stays at its initial level
        let n = row.len();
        assert!(row[1..n - 1].iter().all(|v| v.abs() < 1e-6), "{row:?}");
    }
}

#[test]
fn demand_beyond_capacity_fails_as_infeasible() {
    let (tmp, out) = solve_demand("toy3", "500\n500\n");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("infeasible"), "{err}");
    assert!(stdout(&out).contains("scenario 0: FAILED"));
    let csv = fs::read_to_string(tmp.path().join("run/solutions.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,failed"));
}

#[test]
fn train_then_eval_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(gen_data(&data, "10", &[]).status.success());
    let run = tmp.path().join("train");
    let out = mpopf(&[
        "--run-dir",
        path(&run),
        "train",
        "--case",
        "toy3",
        "--dataset",
        path(&data),
        "--mode",
        "mpa_unsup",
        "--epochs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ckpt: PathBuf = run.join("checkpoint.json");
    assert!(ckpt.exists() && run.join("train_record.csv").exists());

    let eval = tmp.path().join("eval");
    let out = mpopf(&[
        "--run-dir",
        path(&eval),
        "eval",
        "--case",
        "toy3",
        "--dataset",
        path(&data),
        "--checkpoint",
        path(&ckpt),
        "--scales",
        "1.0,1.05",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let accuracy = fs::read_to_string(eval.join("accuracy.csv")).unwrap();
    // exact and mpa_unsup rows at both scales
    assert_eq!(accuracy.lines().count(), 5, "{accuracy}");
    let text = stdout(&out);
    assert!(
        text.lines()
            .any(|l| l.starts_with("exact") && l.contains("gap 0.0000%")),
        "{text}"
    );

    // supervised mode without labels is a usage error
    let bare = tmp.path().join("bare");
    assert!(gen_data(&bare, "6", &["--no-labels"]).status.success());
    let out = mpopf(&[
        "--run-dir",
        path(&tmp.path().join("t2")),
        "train",
        "--case",
        "toy3",
        "--dataset",
        path(&bare),
        "--mode",
        "mpp_sup",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
