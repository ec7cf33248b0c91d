use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_filippov-lab"));
    c.env_remove("FILIPPOV_LAB_OUT");
    c
}

fn system(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(s.trim_end().lines().count(), 1, "{s}");
    s
}

#[test]
fn classify_toy_origin() {
    let dir = tempfile::tempdir().unwrap();
    let toy = system("toy.json");
    let o = run(
        &["classify", "--system", toy.to_str().unwrap(), "--alpha", "0", "--beta", "0", "--b", "-0.3333"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "CuspFold degree=2 L0=0.4444");
}

#[test]
fn toy_bifset_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["toy-bifset", "--b", "-0.3333333", "--beta-max", "3", "--n", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("toy-bifset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    let svg = std::fs::read_to_string(dir.path().join("toy-bifset.svg")).unwrap();
    assert!(svg.contains("<polyline"));
    assert!(!dir.path().join("toy-bifset.json").exists());
}

#[test]
fn formats_flag_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["boost-ts-curve", "--n", "10", "--formats", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("boost-ts-curve.json").exists());
    assert!(!dir.path().join("boost-ts-curve.csv").exists());
    assert!(!dir.path().join("boost-ts-curve.svg").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["boost-ts-curve", "--n", "5"]).env("FILIPPOV_LAB_OUT", dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("boost-ts-curve.csv").exists());
}

#[test]
fn domain_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["boost-ts-curve", "--k-min", "0.5", "--k-max", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_line(&o).starts_with("boost-ts-curve:"));
    let o = run(&["toy-clc", "--alpha", "5", "--beta", "1", "--b", "-0.3333"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_line(&o).contains("toy-clc"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["toy-clc", "--alpha", "0.8", "--bogus", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).contains("toy-clc"));
    let toy = system("toy.json");
    let o = run(&["classify", "--system", toy.to_str().unwrap(), "--param", "gamma=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).contains("classify"));
    let o = run(&["toy-bifset", "--b", "nan"], dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr_line(&o).contains("toy-bifset"));
}

#[test]
fn seeded_harness_is_reproducible() {
    let args = ["nf-nonexistence", "--trials", "3", "--controls", "2", "--c-samples", "3", "--seed", "7"];
    let mut outputs = Vec::new();
    for jobs in ["1", "3", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let o = bin().args(args).args(["--jobs", jobs]).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(dir.path().join("nf-nonexistence.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn boost_clc_reports_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["boost-clc", "--k", "6", "--a", "1.3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("boost-clc.csv")).unwrap();
    assert!(csv.starts_with("k,a,x0,y0,x1,y1,tau_plus,tau_minus"));
}
