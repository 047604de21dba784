//! End-to-end tests of the `curlra` binary.

use std::path::Path;
use std::process::Command;

fn curlra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curlra"))
}

fn run(cmd: &mut Command) -> (String, String, bool) {
    let out = cmd.output().expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.success(),
    )
}

#[test]
fn gen_then_cur_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("w.mtx");
    let (stdout, stderr, ok) = run(curlra()
        .args(["gen", "--kind", "factor-gaussian", "--m", "48", "--n", "40"])
        .args(["--r", "3", "--eps", "1e-10", "--seed", "7"])
        .arg("--out")
        .arg(&matrix));
    assert!(ok, "gen failed: {stderr}");
    assert!(stdout.contains("48 x 40"), "{stdout}");
    assert!(matrix.exists());

    let saved = dir.path().join("factorization.cur");
    let (stdout, stderr, ok) = run(curlra()
        .args([
            "cur",
            "--pipeline",
            "cross-approx",
            "--r",
            "3",
            "--loops",
            "4",
            "--seed",
            "3",
        ])
        .arg("--input")
        .arg(&matrix)
        .arg("--save-cur")
        .arg(&saved));
    assert!(ok, "cur failed: {stderr}");
    assert!(stdout.contains("dense audit"), "{stdout}");
    assert!(stdout.contains("entries touched"), "{stdout}");
    assert!(saved.exists());
    let cur: curlra::CurLra<f64> = curlra::skeleton::read_curlra(&saved).unwrap();
    assert_eq!(cur.target_rank(), 3);
    assert_eq!(cur.source_shape(), (48, 40));
}

#[test]
fn bench_config_is_deterministic_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "name = smoke\ngenerator = factor_gaussian\nm = 32\nn = 32\nr = 3\neps = 1e-10\n\
         pipeline = cross_approx\nloops = 3\ntrials = 6\nseed = 11\n",
    )
    .unwrap();

    let csv_a = bench_csv(dir.path(), &config, "a.csv");
    let csv_b = bench_csv(dir.path(), &config, "b.csv");
    assert_eq!(
        curlra::harness::strip_seconds_column(&csv_a),
        curlra::harness::strip_seconds_column(&csv_b),
        "reports differ beyond the wall-time column"
    );
    assert!(csv_a.starts_with(curlra::harness::CSV_HEADER));
}

fn bench_csv(dir: &Path, config: &Path, name: &str) -> String {
    let out = dir.join(name);
    let (_, stderr, ok) = run(curlra()
        .args(["bench", "--format", "csv"])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(&out));
    assert!(ok, "bench failed: {stderr}");
    std::fs::read_to_string(&out).unwrap()
}

#[test]
fn ks_and_norms_emit_reports() {
    let (stdout, stderr, ok) =
        run(curlra().args(["ks", "--n", "32", "--t-list", "2,8", "--trials", "5"]));
    assert!(ok, "{stderr}");
    assert!(stdout.contains("mean_ks_statistic"), "{stdout}");

    let (stdout, stderr, ok) = run(curlra().args(["norms", "--trials", "20"]));
    assert!(ok, "{stderr}");
    assert!(stdout.contains("mean ||G||"), "{stdout}");
}

#[test]
fn bad_config_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(
        &config,
        "generator = factor_gaussian\nm = 8\nn = 8\nr = 2\npipeline = primitive\nwat = 1\n",
    )
    .unwrap();
    let (_, stderr, ok) = run(curlra().arg("bench").arg("--config").arg(&config));
    assert!(!ok);
    assert!(stderr.contains("config.wat"), "{stderr}");
}
