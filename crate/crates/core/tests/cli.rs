use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use unravel::runner::{parse_config, CsvTable, MANIFEST_NAME};

fn unravel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unravel"))
        .args(args)
        .env_remove("UNRAVEL_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn run_ok(config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = unravel(&args);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_FIG1: &str = "preset = fig1\nn_traj = 6\nt_final = 0.2\noutput_stride = 0.03\n";

#[test]
fn unknown_key_reports_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "preset = fig1\nbogus = 3\n");
    let o = unravel(&["--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
}

#[test]
fn invalid_values_are_rejected() {
    let dir = TempDir::new().unwrap();
    for (text, needle) in [
        ("n_traj = 4\n", "preset"),
        ("preset = fig1\ndt = -1\n", "line 2"),
        ("preset = fig1\noutput_stride = 0.0015\n", "line 2"),
        ("preset = fig5a\nt_final = 3\n", "line 2"),
        ("preset = fig1\npolicies = cov:x\n", "line 2"),
        ("preset = fig1\nkappa\n", "line 2"),
    ] {
        let cfg = write_config(dir.path(), "bad.cfg", text);
        let o = unravel(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert!(!o.status.success(), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
    let o = unravel(&["--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn row_count_and_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "fig1.cfg", SMALL_FIG1);
    let out = dir.path().join("out");
    run_ok(&cfg, &out, &[]);
    let files = csv_files(&out);
    assert_eq!(files.len(), 3);
    for (name, _) in &files {
        let table = CsvTable::read(&out.join(name)).unwrap();
        assert_eq!(table.header, ["t", "mean_sigma2_a", "var_sigma2_a", "ci95"]);
        assert_eq!(table.rows.len(), (0.2f64 / 0.03).floor() as usize + 1);
        assert!((table.rows[0][1] - 8.0).abs() < 1e-9);
    }
}

#[test]
fn manifest_reproduces_csvs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "fig1.cfg", SMALL_FIG1);
    let first = dir.path().join("first");
    run_ok(&cfg, &first, &["--seed", "17"]);
    let manifest = first.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("seed = 17") && text.contains("run_version = "));
    let resolved = parse_config(&text).unwrap();
    assert_eq!(resolved.seed, 17);
    assert_eq!(resolved.n_traj, 6);

    let second = dir.path().join("second");
    run_ok(&manifest, &second, &[]);
    assert_eq!(csv_files(&first), csv_files(&second));
    let strip = |t: String| t.lines().filter(|l| !l.starts_with("output_path")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(text), strip(fs::read_to_string(second.join(MANIFEST_NAME)).unwrap()));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sq.cfg",
        "preset = squeezing_decay\nn_traj = 9\nt_final = 0.1\npolicies = sq:1 fixed:0,1\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&cfg, &a, &["--threads", "1"]);
    run_ok(&cfg, &b, &["--threads", "4"]);
    let files = csv_files(&a);
    assert_eq!(files.len(), 4);
    assert_eq!(files, csv_files(&b));
    assert_eq!(fs::read(a.join(MANIFEST_NAME)).unwrap().len(), fs::read(b.join(MANIFEST_NAME)).unwrap().len());
}

#[test]
fn seed_override_changes_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "fig1.cfg", SMALL_FIG1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&cfg, &a, &["--seed", "1"]);
    run_ok(&cfg, &b, &["--seed", "2", "--n-traj", "6"]);
    assert_ne!(csv_files(&a), csv_files(&b));
}

#[test]
fn kicked_preset_writes_series_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.cfg",
        "preset = fig5b\nperiods = 4\ndiscard_periods = 2\nlambdas = 1 2\ndim = 12\npolicies = cov:1\n",
    );
    let out = dir.path().join("out");
    run_ok(&cfg, &out, &[]);
    let names: Vec<String> = csv_files(&out).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        ["fig5b_cov_1_lambda1.csv", "fig5b_cov_1_lambda2.csv", "fig5b_cov_1_stationary.csv"]
    );
    let summary = CsvTable::read(&out.join("fig5b_cov_1_stationary.csv")).unwrap();
    assert_eq!(summary.column("lambda").unwrap(), vec![1.0, 2.0]);
    assert_eq!(summary.column("dim").unwrap(), vec![12.0, 24.0]);
    let series = CsvTable::read(&out.join("fig5b_cov_1_lambda2.csv")).unwrap();
    let t = series.column("t").unwrap();
    assert_eq!(t.len(), (4.0f64 * 1.98 / 0.1).floor() as usize + 1);
    assert!((t[1] - 0.2).abs() < 1e-12);
}
