use std::path::Path;
use std::process::{Command, Output};

fn growthmech(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_growthmech"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("GROWTHMECH_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let o = Command::new(env!("CARGO_BIN_EXE_growthmech")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in [
        "curvature",
        "annulus-iso",
        "annulus-aniso",
        "sphere",
        "stressfree-2d",
        "stressfree-3d",
        "embed",
        "evolve",
        "linearized",
        "decompose-check",
    ] {
        assert!(text.contains(name), "{name} missing from help");
    }
}

#[test]
fn flat_polar_metric_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["curvature", "--metric", "polar", "--grid", "33"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("curvature.csv")).unwrap();
    assert!(csv.starts_with("# command: curvature"));
    assert!(csv.contains("scalar_fd"));
}

#[test]
fn stress_free_verdicts_set_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["stressfree-2d", "--omega", "X1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = growthmech(dir.path(), &["stressfree-2d", "--omega", "X1*X2 + X1^2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("verification: FAILED"));
    let o = growthmech(dir.path(), &["stressfree-3d", "--omega", "X1*X2", "--grid", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn annulus_examples_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["annulus-iso", "--omega", "-R", "--r1", "0.5", "--r2", "2", "--mu", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let o = growthmech(dir.path(), &["annulus-aniso", "--omega", "0.1*R"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("annulus-aniso.csv")).unwrap();
    assert!(csv.contains("# mode: traction-free"));
}

#[test]
fn paper_exact_without_solution_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["annulus-iso", "--omega", "-R", "--boundary", "paper-exact"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("never vanishes"), "{}", stderr(&o));
}

#[test]
fn parse_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["annulus-iso", "--omega", "ln("]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("column 4"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_and_missing_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["curvature", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = growthmech(dir.path(), &["embed", "--omega", "-R"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("range"), "{}", stderr(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# embedding\nfamily = iso\nomega = -R\nrange = 0 2\nsamples = 129\ntol = 1e-6\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = growthmech(dir.path(), &["embed", "--config", cfg]);
    assert_eq!(o.status.code(), Some(2), "tolerance from the file: {}", stdout(&o));
    let o = growthmech(dir.path(), &["embed", "--config", cfg, "--tol", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("embed_profile.csv")).unwrap();
    assert!(csv.contains("# samples: 129"));
    assert!(csv.contains("# omega: -R"));
    assert!(csv.contains("# tol: 1e-3"));
    let obj = std::fs::read_to_string(dir.path().join("embed.obj")).unwrap();
    assert!(obj.contains("# valid_interval: [0, 2]"));

    std::fs::write(dir.path().join("bad.cfg"), "omega = -R\nnonsense = 3\n").unwrap();
    let o = growthmech(dir.path(), &["embed", "--config", dir.path().join("bad.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_growthmech"))
        .args(["decompose-check", "--samples", "10", "--out"])
        .arg(dir.path())
        .env("GROWTHMECH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("GROWTHMECH_THREADS"));
}

#[test]
fn evolve_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["evolve", "--F", "1.1,0;0,0.9", "--t-end", "0.1", "--dt", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("evolve.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 12, "{csv}");
    let o = growthmech(dir.path(), &["evolve", "--energy", "ogden"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn linearized_rejects_bad_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = growthmech(dir.path(), &["linearized", "--dim", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let o = growthmech(dir.path(), &["linearized", "--dim", "3", "--beta", "X1 + 2*X3", "--grid", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("stress_free: true"));
}
