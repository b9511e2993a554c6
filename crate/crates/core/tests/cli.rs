use std::fs;
use std::path::Path;
use std::process::Command;

use rigidplast::cli::{parse_config, Command as Cmd, RunConfig};

fn rigidplast(dir: &Path, args: &[&str], config: &str) -> (i32, String) {
    let path = dir.join("case.cfg");
    fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rigidplast"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .env_remove("RIGIDPLAST_OUT")
        .current_dir(dir)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = rigidplast(
        dir.path(),
        &["run", "--out", "res"],
        "benchmark = shear\nmesh_n = 4\ntime_steps = 8\n",
    );
    assert_eq!(code, 0, "{err}");
    let res = dir.path().join("res");
    let csv = fs::read_to_string(res.join("metrics.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("step,time,Q,D,W,gap,max_sigma_dev,plastic_cell_fraction")
    );
    assert_eq!(csv.lines().count(), 1 + 9);
    let s = json(&res.join("summary.json"));
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["command"], "run");
    assert!(fs::read_to_string(res.join("fields_final.vtk"))
        .unwrap()
        .starts_with("# vtk DataFile"));
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.cfg");
    fs::write(&cfg, "mesh_n = 4\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rigidplast"))
        .args(["example41", "--out", "flag", "--config"])
        .arg(&cfg)
        .env("RIGIDPLAST_OUT", dir.path().join("env"))
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("env/summary.json").exists());
    assert!(!dir.path().join("flag").exists());
}

#[test]
fn config_errors_exit_with_two_and_record_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = rigidplast(
        dir.path(),
        &["run", "--out", "o"],
        "mesh_n = 4\nmesh_size = 3\n",
    );
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
    let e = json(&dir.path().join("o/error.json"));
    assert_eq!(e["kind"], "config");
    assert_eq!(e["exit_code"], 2);
    assert!(!dir.path().join("o/metrics.csv").exists());
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = rigidplast(dir.path(), &["sweep", "--out", "o"], "command = run\n");
    assert_eq!(code, 2);
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rigidplast"))
        .args(["run", "--out", "o", "--config", "absent.cfg"])
        .env_remove("RIGIDPLAST_OUT")
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn sweep_and_report_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "benchmark = shear\nmesh_n = 4\ntime_steps = 8\nepsilon_list = 1, 0.25, 0.0625\n";
    assert_eq!(rigidplast(dir.path(), &["sweep", "--out", "s"], cfg).0, 0);
    let csv = fs::read_to_string(dir.path().join("s/metrics.csv")).unwrap();
    assert!(csv.starts_with("epsilon,step,time,e_l2,"));
    let s = json(&dir.path().join("s/summary.json"));
    assert_eq!(s["cauchy_distances"].as_array().unwrap().len(), 2);
    assert_eq!(
        rigidplast(
            dir.path(),
            &["report", "--out", "r"],
            "benchmark = shear\nmesh_n = 4\ntime_steps = 8\n"
        )
        .0,
        0
    );
    let csv = fs::read_to_string(dir.path().join("r/metrics.csv")).unwrap();
    assert!(csv.starts_with("time_steps,max_dt,max_abs_gap,budget,within_budget,one_sided"));
}

#[test]
fn serialized_config_parses_back() {
    let text = "command = sweep\nbenchmark = traction\nmesh_n = 6\nepsilon_list = 1, 0.5\nex41_f = 0.1 | 0.5 | -0.1\n";
    let c = parse_config(text).unwrap();
    assert_eq!(c.command, Some(Cmd::Sweep));
    assert_eq!(parse_config(&c.serialize()).unwrap(), c);
    assert_eq!(
        parse_config(&RunConfig::default().serialize()).unwrap(),
        RunConfig::default()
    );
}
