use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn vvot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vvot")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn number(o: &Output) -> f64 {
    stdout(o).trim().parse().unwrap_or_else(|_| panic!("not a number: {:?} / {:?}", stdout(o), stderr(o)))
}

struct Fixtures {
    dir: TempDir,
}

impl Fixtures {
    fn new() -> Self {
        let f = Self { dir: TempDir::new().unwrap() };
        f.write("g.json", r#"{"n": 2, "q": [[0, 1], [1, 0]]}"#);
        f.write("k3.json", r#"{"n": 3, "q": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}"#);
        f.write("mu1.json", r#"{"atoms": [{"x": [0.0], "w": [0.5, 0.5]}]}"#);
        f.write("mu2.json", r#"{"atoms": [{"x": [0.3], "w": [0.5, 0.5]}]}"#);
        f.write("mu3.json", r#"{"atoms": [{"x": [0.0], "w": [0.6, 0.4]}]}"#);
        f.write(
            "data.json",
            r#"[{"atoms": [{"x": [0.0], "w": [0.5, 0.5]}]},
                {"atoms": [{"x": [0.3], "w": [0.2, 0.8]}]},
                {"atoms": [{"x": [-0.5], "w": [1, 0]}, {"x": [0.5], "w": [0, 0]}]}]"#,
        );
        f
    }

    fn write(&self, name: &str, text: &str) {
        fs::write(self.path(name), text).unwrap();
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn wg_arithmetic_edge_is_sqrt2() {
    let f = Fixtures::new();
    let out = vvot(&["wg", "--graph", &f.arg("g.json"), "--theta", "arithmetic", "--p0", "1,0", "--p1", "0,1", "--time-steps", "64"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!((number(&out) - std::f64::consts::SQRT_2).abs() < 2e-2);
}

#[test]
fn wg_writes_path_json() {
    let f = Fixtures::new();
    let path = f.arg("wg.json");
    let out = vvot(&["wg", "--p0", "0.5,0.5", "--p1", "0.75,0.25", "--out", &path]);
    assert!(out.status.success());
    let v = json(&f.path("wg.json"));
    assert_eq!(v["states"].as_array().unwrap().len(), 17);
    assert!(v["convergence"]["converged"].as_bool().unwrap());
}

#[test]
fn simplex_dist_uses_closed_form_on_two_nodes() {
    let out = vvot(&["simplex-dist", "--r0", "0.5", "--r1", "0.6"]);
    assert!(out.status.success());
    assert!((number(&out) - 0.141_899_987_288_760_28).abs() < 1e-9);
}

#[test]
fn static_distances_of_a_translation() {
    let f = Fixtures::new();
    let pair = ["--mu", &f.arg("mu1.json"), "--nu", &f.arg("mu2.json")];
    for cmd in ["w2w", "d-upper"] {
        let out = vvot(&[&[cmd], &pair[..]].concat());
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        assert!((number(&out) - 0.3).abs() < 1e-8, "{cmd}");
    }
    let out = vvot(&[&["dyn"], &pair[..]].concat());
    assert!((number(&out) - 0.3).abs() < 2e-2);
}

#[test]
fn bl_writes_components() {
    let f = Fixtures::new();
    let path = f.arg("bl.json");
    let out = vvot(&["bl", "--mu", &f.arg("mu1.json"), "--nu", &f.arg("mu2.json"), "--out", &path]);
    assert!(out.status.success());
    let v = json(&f.path("bl.json"));
    assert_eq!(v["components"].as_array().unwrap().len(), 2);
    assert!((v["d_bl"].as_f64().unwrap() - number(&out)).abs() < 1e-9);
}

#[test]
fn dyn_dumps_one_csv_per_level() {
    let f = Fixtures::new();
    let dir = f.arg("slices");
    let out = vvot(&[
        "dyn", "--mu", &f.arg("mu1.json"), "--nu", &f.arg("mu3.json"), "--graph", &f.arg("g.json"),
        "--time-steps", "4", "--grid-cells", "8", "--out", &dir,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files = fs::read_dir(f.path("slices")).unwrap().count();
    assert_eq!(files, 5);
    let first = fs::read_to_string(f.path("slices").join("slice_0000.csv")).unwrap();
    assert!(first.starts_with("cell,species,rho,m,sigma_0,sigma_1"));
    assert_eq!(first.lines().count(), 1 + 8 * 2);
}

#[test]
fn chain_report_has_every_link() {
    let f = Fixtures::new();
    let path = f.arg("chain.json");
    let out = vvot(&["chain", "--mu", &f.arg("mu1.json"), "--nu", &f.arg("mu3.json"), "--out", &path]);
    assert!(out.status.success(), "{}", stdout(&out));
    let v = json(&f.path("chain.json"));
    for key in ["d_bl", "w_dyn", "d_upper", "w2w", "lower_bound", "upper_bound", "ok", "violations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["ok"], true);
}

#[test]
fn lot_commands_are_deterministic() {
    let f = Fixtures::new();
    let data = f.arg("data.json");
    let a = vvot(&["lot-matrix", "--data", &data, "--seed", "3"]);
    let b = vvot(&["lot-matrix", "--data", &data, "--seed", "3"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rows: Vec<Vec<f64>> = stdout(&a)
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for i in 0..3 {
        assert_eq!(rows[i][i], 0.0);
        for j in 0..3 {
            assert_eq!(rows[i][j], rows[j][i]);
        }
    }

    let csv = f.arg("embed.csv");
    let out = vvot(&["lot-embed", "--mu", &f.arg("mu3.json"), "--reference-atoms", "5", "--out", &csv]);
    assert!(out.status.success());
    let text = fs::read_to_string(f.path("embed.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "atom,x_0,r_0,Tx_0,Tr_0");
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn pde_run_writes_trajectory_and_diagnostics() {
    let f = Fixtures::new();
    let dir = f.arg("pde");
    let out = vvot(&["pde-run", "--t-end", "0.01", "--snapshots", "2", "--out", &dir]);
    assert!(out.status.success(), "{}", stderr(&out));
    let diag = fs::read_to_string(f.path("pde").join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,E,mass_1,mass_2,min_rho"));
    let traj = fs::read_to_string(f.path("pde").join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 3 * 40 * 2);
}

#[test]
fn verify_examples_passes() {
    let out = vvot(&["verify", "--suite", "examples"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("NOTE"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_2() {
    let f = Fixtures::new();
    assert_eq!(vvot(&["wg", "--p0", "1,0"]).status.code(), Some(2));
    assert_eq!(vvot(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(vvot(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(vvot(&["wg", "--graph", &f.arg("k3.json"), "--p0", "1,0", "--p1", "0,1"]).status.code(), Some(2));

    f.write("bad.json", r#"{"atoms": 3}"#);
    let out = vvot(&["bl", "--mu", &f.arg("bad.json"), "--nu", &f.arg("mu2.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(r#"{"atoms": [{"x": [0.0], "w": [0.5, 0.5]}"#));

    let out = vvot(&["w2w", "--mu", &f.arg("missing.json"), "--nu", &f.arg("mu2.json"), "--graph", &f.arg("g.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn computation_errors_exit_with_1() {
    let f = Fixtures::new();
    f.write("three.json", r#"{"atoms": [{"x": [0.0], "w": [0.2, 0.3, 0.5]}]}"#);
    let out = vvot(&["w2w", "--mu", &f.arg("mu1.json"), "--nu", &f.arg("three.json")]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn help_prints_defaults() {
    let out = vvot(&["dyn", "--help"]);
    let text = stdout(&out);
    for flag in ["--seed", "--tol", "--max-iter", "--grid-cells", "--time-steps"] {
        assert!(text.contains(flag), "{flag}");
    }
    assert!(text.contains("[default: 32]"));
}
