use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use photonic_pinn::model::{Checkpoint, NetworkTopology, ParameterVector};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonic-pinn"))
        .args(args)
        .output()
        .expect("spawn photonic-pinn")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "iterations = 10\neval_every = 5\neval_nx = 11\neval_nt = 11\nthreads = 1\n";

#[test]
fn train_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "run.conf", SMALL);
    let out = run(&["train", arg(&conf)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let curve = fs::read_to_string(dir.path().join("out/error_curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], "iter,loss_total,l_r,l_0,l_b,l2_rel,l2_abs,tile_ops_cum");

    let grid = fs::read_to_string(dir.path().join("out/solution_grid.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("x,t,u_pred,u_true"));
    assert_eq!(grid.lines().count(), 1 + 11 * 11);
    for f in ["checkpoint.csv", "resolved_config.txt"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(
        dir.path(),
        "a.conf",
        &format!("{SMALL}output_dir = a\nsigma_read = 0.01\nbits = 10\n"),
    );
    let b = write_config(
        dir.path(),
        "b.conf",
        &format!("{SMALL}output_dir = b\nsigma_read = 0.01\nbits = 10\n").replace("threads = 1", "threads = 3"),
    );
    assert!(run(&["train", arg(&a)]).status.success());
    assert!(run(&["train", arg(&b)]).status.success());
    for f in ["error_curve.csv", "solution_grid.csv", "checkpoint.csv"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn unknown_key_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "bad.conf", "iterations = 3\nlearning_rate = 0.1\n");
    let out = run(&["train", arg(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "run.conf", "iterations = 2\neval_nx = 5\neval_nt = 5\n");
    assert!(run(&["train", arg(&conf)]).status.success());
    let out = run(&["train", arg(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    assert!(run(&["train", arg(&conf), "--force"]).status.success());
}

#[test]
fn eval_of_zero_model_on_linear_lut() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("lut.csv"),
        "voltage,w1,w2,w3,w4\n0,0,0,0,0\n2,1,1,1,1\n",
    )
    .unwrap();
    let conf = write_config(
        dir.path(),
        "run.conf",
        "lut_path = lut.csv\neval_nx = 21\neval_nt = 21\n",
    );
    let topo = NetworkTopology::default();
    let mut values = vec![1.0; topo.n_weights()];
    values.extend(vec![0.0; topo.n_biases()]);
    let ck = Checkpoint::new(ParameterVector::from_flat(topo, values).unwrap());
    let ck_path = dir.path().join("zero.csv");
    fs::write(&ck_path, ck.to_csv()).unwrap();

    let out = run(&["eval", arg(&ck_path), arg(&conf)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("l2_rel=1 "));
    let grid = fs::read_to_string(dir.path().join("out/eval_grid.csv")).unwrap();
    for line in grid.lines().skip(1) {
        let u_pred: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(u_pred, 0.0);
    }
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "run.conf", "eval_nx = 5\neval_nt = 5\n");
    let ck = dir.path().join("short.csv");
    fs::write(&ck, "index,kind,layer,row,col,value\n0,voltage,0,0,0,1.0\n").unwrap();
    let out = run(&["eval", arg(&ck), arg(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/eval_grid.csv").exists());
}

#[test]
fn sweep_rejects_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "run.conf", SMALL);
    let out = run(&["sweep-bits", arg(&conf), "--bits", "1,8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn sweep_summary_has_cells_and_medians() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "run.conf",
        "iterations = 3\neval_every = 3\neval_nx = 5\neval_nt = 5\nk_samples = 2\n",
    );
    let out = run(&["sweep-bits", arg(&conf), "--bits", "8,10,full", "--seeds", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("out/sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 15 + 3);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(1) == Some("median")).count(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
    assert!(dir.path().join("out/bits-8/seed-4/error_curve.csv").exists());
    assert!(dir.path().join("out/bits-full/seed-0/checkpoint.csv").exists());
}

#[test]
fn missing_arguments_exit_2() {
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = photonic_pinn::config::RunConfig::load(&dir.join("default.conf")).unwrap();
    let expected = photonic_pinn::config::RunConfig {
        output_dir: default.output_dir.clone(),
        ..Default::default()
    };
    assert_eq!(default, expected);
    photonic_pinn::config::RunConfig::load(&dir.join("noisy-8bit.conf")).unwrap();
}
