use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ote")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_scenario_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s2.csv");
    let o = ote(&["simulate", "--scenario", "2", "--variant", "3", "--n", "50", "--seed", "9", "-o", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 13);
    assert!(header.starts_with("x1,x2,") && header.ends_with(",y"));
    assert_eq!(lines.count(), 50);
}

#[test]
fn bench_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.conf");
    fs::write(
        &config,
        "# small run\nscenario = 1\nn = 120\nmethods = ote_oob, full_forest\nrepetitions = 5\ntrees = 30\nseed = 3\n",
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = ote(&["--threads", "1", "bench", "--config", path(&config), "--repetitions", "2", "-o", path(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("method"));
    assert!(stdout.contains("ote_oob") && stdout.contains("full_forest"));
    let rows = fs::read_to_string(&a).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2);
    assert!(rows.starts_with("method,repetition,misclassification,brier,sensitivity,kappa,selected_trees\n"));

    let o = ote(&["--threads", "4", "bench", "--config", path(&config), "--repetitions", "2", "-o", path(&b)]);
    assert!(o.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn timing_column_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = ote(&[
        "bench", "--scenario", "1", "--n", "80", "--methods", "ote_sub", "--repetitions", "1", "--trees", "10",
        "--timing", "-o", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&out).unwrap().lines().next().unwrap().ends_with(",wall_time_s"));
}

#[test]
fn sweep_m_emits_one_block_per_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = ote(&[
        "--sequential", "sweep-m", "--scenario", "1", "--n", "100", "--methods", "ote_oob", "--repetitions", "2",
        "--trees", "20", "--fractions", "0.1,0.5", "-o", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("top_fraction,candidates,method,"));
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("0.1,2,ote_oob,"));
    assert!(lines[3].starts_with("0.5,10,ote_oob,"));
    assert_eq!(String::from_utf8(o.stdout).unwrap().matches("M fraction").count(), 2);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for args in [
        vec!["bench", "--trees", "10", "-o", path(&out)],
        vec!["bench", "--scenario", "1", "--methods", "ote_oob", "--validation-fraction", "0.2", "-o", path(&out)],
        vec!["bench", "--csv", "/nonexistent.csv", "--label-column", "y", "--positive-label", "1", "-o", path(&out)],
        vec!["simulate", "--scenario", "7", "-o", path(&out)],
    ] {
        let o = ote(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        let stderr = String::from_utf8(o.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{stderr}");
        assert!(stderr.starts_with("error: "));
    }
}
