use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hdbo() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hdbo"));
    c.env_remove("HDBO_SEED");
    c
}

fn run(mut c: Command) -> Output {
    c.output().expect("binary runs")
}

fn ok(c: Command) -> Output {
    let out = run(c);
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A short bo-run on a cheap configuration.
fn quick_bo(bench: &str, out: &Path) -> Command {
    let mut c = hdbo();
    c.args([
        "bo-run",
        "--benchmark",
        bench,
        "--budget",
        "14",
        "--n-init",
        "10",
    ])
    .args(["--epochs", "40", "--acq-starts", "4", "--acq-iters", "30"])
    .arg("--out")
    .arg(out);
    c
}

#[test]
fn bo_run_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let mut c = hdbo();
    c.args([
        "bo-run",
        "--benchmark",
        "Hartmann6(6,6)",
        "--kernel",
        "matern52",
    ])
    .args([
        "--init",
        "robust:1.0",
        "--acq",
        "ucb:1.5",
        "--budget",
        "120",
    ])
    .args(["--seed", "7", "--out"])
    .arg(&out);
    ok(c);

    let rows = lines(&out);
    assert_eq!(rows.len(), 121);
    assert_eq!(
        rows[0],
        "step,x1,x2,x3,x4,x5,x6,y,best_so_far,initial_grad_norm,ls_rel_diff,wall_time_s"
    );
    let mut best = f64::NEG_INFINITY;
    for (i, row) in rows[1..].iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 12);
        assert_eq!(f[0], i.to_string());
        let y: f64 = f[7].parse().unwrap();
        best = best.max(y);
        assert_eq!(f[8].parse::<f64>().unwrap(), best);
        assert_eq!(f[9].is_empty(), i < 20, "row {i}");
        assert!(f[11].is_empty());
    }

    let m = json(&dir.path().join("t.manifest.json"));
    assert_eq!(m["command"], "bo-run");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["run"]["budget"], 120);
    assert_eq!(m["outputs"][0], out.to_str().unwrap());
    assert!(m["version"].as_str().unwrap().starts_with("hdbo-cli "));
}

#[test]
fn bo_run_reruns_identically_and_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    ok(quick_bo("Ackley(4,2)", &a));
    ok(quick_bo("Ackley(4,2)", &b));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let mut again = hdbo();
    again
        .args(["bo-run", "--config"])
        .arg(dir.path().join("a.manifest.json"))
        .arg("--out")
        .arg(&c);
    ok(again);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn wide_trajectories_put_coordinates_in_a_sibling_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wide.csv");
    ok(quick_bo("Ackley(40,5)", &out));
    let rows = lines(&out);
    assert_eq!(
        rows[0],
        "step,x_file,y,best_so_far,initial_grad_norm,ls_rel_diff,wall_time_s"
    );
    assert!(rows[1].starts_with("0,wide.coords.csv,"));
    let coords = lines(&dir.path().join("wide.coords.csv"));
    assert_eq!(coords.len(), 15);
    assert!(coords[0].starts_with("step,x1,x2,"));
    assert!(coords[0].ends_with(",x40"));
    assert_eq!(coords[1].split(',').count(), 41);
}

#[test]
fn unknown_benchmark_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(quick_bo("Nope(3,3)", &dir.path().join("t.csv")));
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for name in ["Ackley", "Rosenbrock", "Stybtang", "Hartmann6"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn missing_output_directory_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(quick_bo("Ackley(3,3)", &dir.path().join("no/such/t.csv")));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn bad_flags_exit_with_usage() {
    let mut c = hdbo();
    c.args(["bo-run", "--budget", "lots"]);
    assert_eq!(run(c).status.code(), Some(2));
    let mut c = hdbo();
    c.args(["bo-run", "--benchmark", "Ackley(3,3)", "--acq", "pi"]);
    assert_eq!(run(c).status.code(), Some(2));
}

#[test]
fn theory_table_defaults() {
    let mut c = hdbo();
    c.arg("theory-table");
    let out = ok(c);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "kernel,target,min_d");
    let got: Vec<u64> = rows[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(
        got,
        [172, 205, 219, 250, 264, 294, 980, 1040, 1064, 1116, 1137, 1185]
    );
}

#[test]
fn theory_table_single_target_and_custom_xi() {
    let mut c = hdbo();
    c.args(["theory-table", "--targets", "0.95"]);
    let text = String::from_utf8(ok(c).stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",0.95,172"), "{}", rows[0]);
    assert!(rows[1].ends_with(",0.95,980"), "{}", rows[1]);

    let mut c = hdbo();
    c.args(["theory-table", "--xi", "1e-10"]);
    let text = String::from_utf8(ok(c).stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn theory_table_bound_report() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let bounds = dir.path().join("bounds.csv");
    let mut c = hdbo();
    c.args(["theory-table", "--dims", "100,300", "--mc-samples", "2000"])
        .arg("--out")
        .arg(&table)
        .arg("--bounds-out")
        .arg(&bounds);
    ok(c);
    let rows = lines(&bounds);
    assert_eq!(
        rows[0],
        "kernel,xi,l0_or_c,tau,d,lower_bound,upper_bound,mc_estimate,mc_se"
    );
    // 2 kernels x 4 settings x 2 dims.
    assert_eq!(rows.len(), 17);
    assert!(rows.iter().any(|r| r.contains(",l0=0.5,")));
    assert!(rows
        .iter()
        .any(|r| r.contains(",c=1.0,") || r.contains(",c=1,")));
    let m = json(&dir.path().join("table.manifest.json"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn vanish_sim_requires_an_output_path() {
    let mut c = hdbo();
    c.args(["vanish-sim", "--repeats", "1"]);
    let out = run(c);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn vanish_sim_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let mut c = hdbo();
    c.args(["vanish-sim", "--repeats", "1", "--dims", "50"])
        .args(["--lengthscales", "sqrt(d)", "--kernels", "matern52"])
        .args(["--n-train", "100", "--n-test", "50", "--epochs", "50"])
        .arg("--out")
        .arg(&out);
    ok(c);
    let rows = lines(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("d,lengthscale,kernel,mse_mean,"));
    assert!(rows[1].starts_with("50,sqrt(d),"));
    assert!(rows[1].ends_with(",1,0,false"), "{}", rows[1]);
    let summary = lines(&dir.path().join("sweep.summary.csv"));
    assert_eq!(
        summary,
        ["kernel,lengthscale,failing_d", "matern52,sqrt(d),"]
    );
    let m = json(&dir.path().join("sweep.manifest.json"));
    assert_eq!(m["config"]["sweep"]["repeats"], 1);
}

fn write_random_points(
    dir: &Path,
    name: &str,
    bench: &str,
    n: usize,
    seed: u64,
) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut c = hdbo();
    c.args(["bench-eval", "--benchmark", bench, "--random"])
        .arg(n.to_string())
        .arg("--seed")
        .arg(seed.to_string())
        .arg("--out")
        .arg(&path);
    ok(c);
    path
}

#[test]
fn gp_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_random_points(dir.path(), "train.csv", "Ackley(4,4)", 40, 1);
    let test = write_random_points(dir.path(), "test.csv", "Ackley(4,4)", 20, 2);
    assert_eq!(lines(&train)[0], "x1,x2,x3,x4,y");

    let mut c = hdbo();
    c.args(["gp-fit", "--epochs", "100", "--data"])
        .arg(&train)
        .arg("--test")
        .arg(&test);
    let report: Value = serde_json::from_slice(&ok(c).stdout).unwrap();
    assert_eq!(report["n"], 40);
    assert_eq!(report["d"], 4);
    assert_eq!(report["ls_init"], 2.0);
    for key in [
        "initial_grad_norm",
        "ls_rel_diff",
        "final_objective",
        "initial_objective",
    ] {
        assert!(report["report"][key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!(report["test"]["mse"].as_f64().unwrap().is_finite());
    assert!(report["test"]["test_log_lik"].as_f64().unwrap().is_finite());
    assert_eq!(report["lengthscales"].as_array().unwrap().len(), 4);
}

#[test]
fn gp_fit_robust_init_follows_the_file_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_random_points(dir.path(), "train.csv", "Hartmann6(9,6)", 12, 3);
    let mut c = hdbo();
    c.args([
        "gp-fit",
        "--ls-init",
        "robust:1.0",
        "--dims-from-data",
        "--epochs",
        "5",
    ])
    .arg("--data")
    .arg(&train);
    let report: Value = serde_json::from_slice(&ok(c).stdout).unwrap();
    assert_eq!(report["d"], 9);
    assert_eq!(report["ls_init"], 3.0);

    let mut c = hdbo();
    c.args(["gp-fit", "--dim", "5", "--epochs", "5", "--data"])
        .arg(&train);
    assert_eq!(run(c).status.code(), Some(2));
}

#[test]
fn gp_fit_names_the_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1,x2,y\n0.1,0.2,1.0\n0.3,oops,2.0\n0.5,0.6,3.0\n").unwrap();
    let mut c = hdbo();
    c.args(["gp-fit", "--data"]).arg(&path);
    let out = run(c);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let mut c = hdbo();
    c.args(["gp-fit", "--data"])
        .arg(dir.path().join("missing.csv"));
    assert_eq!(run(c).status.code(), Some(2));
}

#[test]
fn bench_eval_points_file() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "0.5,0.5\n0.25,0.75\n").unwrap();
    let mut c = hdbo();
    c.args(["bench-eval", "--benchmark", "Ackley(2,2)", "--points"])
        .arg(&pts);
    let text = String::from_utf8(ok(c).stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "x1,x2,y");
    // The unit-cube centre maps to the Ackley optimum.
    let (x, y) = rows[1].rsplit_once(',').unwrap();
    assert_eq!(x, "0.5,0.5");
    assert_eq!(y.parse::<f64>().unwrap(), 0.0);

    let mut c = hdbo();
    c.args(["bench-eval", "--benchmark", "Ackley(3,3)", "--points"])
        .arg(&pts);
    assert_eq!(run(c).status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let eval = |extra: &[&str], env: Option<&str>, name: &str| -> (Vec<u8>, Value) {
        let out = dir.path().join(name);
        let mut c = hdbo();
        c.args(["bench-eval", "--benchmark", "Ackley(3,3)", "--random", "5"])
            .args(extra)
            .arg("--out")
            .arg(&out);
        if let Some(v) = env {
            c.env("HDBO_SEED", v);
        }
        ok(c);
        let m = json(
            &dir.path()
                .join(format!("{}.manifest.json", name.trim_end_matches(".csv"))),
        );
        (std::fs::read(&out).unwrap(), m)
    };
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"seed": 6}"#).unwrap();
    let cfg = config.to_str().unwrap();

    let (default, m) = eval(&[], None, "a.csv");
    assert_eq!(m["seed"], 0);
    let (from_env, m) = eval(&[], Some("5"), "b.csv");
    assert_eq!(m["seed"], 5);
    assert_ne!(default, from_env);
    let (from_flag, _) = eval(&["--seed", "5"], None, "c.csv");
    assert_eq!(from_env, from_flag);

    let (_, m) = eval(&["--config", cfg], Some("5"), "d.csv");
    assert_eq!(m["seed"], 6);
    let (_, m) = eval(&["--config", cfg, "--seed", "8"], Some("5"), "e.csv");
    assert_eq!(m["seed"], 8);
}

#[test]
fn config_files_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"targets": [0.99], "colour": "red"}"#).unwrap();
    let mut c = hdbo();
    c.args(["theory-table", "--config"]).arg(&config);
    let out = run(c);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"));

    std::fs::write(&config, r#"{"targets": [0.99]}"#).unwrap();
    let mut c = hdbo();
    c.args(["theory-table", "--config"]).arg(&config);
    let text = String::from_utf8(ok(c).stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    let mut c = hdbo();
    c.args(["theory-table", "--targets", "0.95,0.999", "--config"])
        .arg(&config);
    let text = String::from_utf8(ok(c).stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn worker_pool_size_is_a_global_flag() {
    let mut c = hdbo();
    c.args(["--jobs", "2", "theory-table", "--targets", "0.99"]);
    ok(c);
    let mut c = hdbo();
    c.args(["theory-table", "--jobs", "0"]);
    assert_eq!(run(c).status.code(), Some(2));
}
