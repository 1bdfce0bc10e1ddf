use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use fibxy_cli::output::read_manifest;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_fibxy");

fn fibxy(root: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("FIBXY_OUTPUT_ROOT", root).env_remove("RUST_LOG").output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(tmp.path(), &["potential", "--config", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 30, "cone": {"quantitys": ["spin"]}}"#).unwrap();
    let o = fibxy(tmp.path(), &["potential", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("quantitys"), "{}", stderr(&o));
}

#[test]
fn invalid_values_are_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in ["potential.lambda=-1", "n=0", "t_grid.count=1", "oracle.sites=[2,14]", "jobs=0"] {
        let o = fibxy(tmp.path(), &["potential", "--set", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}: {}", stderr(&o));
    }
    assert!(!tmp.path().join("potential").exists());
}

#[test]
fn flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 30, "potential": {"kind": "fibonacci", "lambda": 2.0}}"#).unwrap();
    let o = fibxy(tmp.path(), &["potential", "-c", cfg.to_str().unwrap(), "-s", "potential.lambda=5", "-s", "n=12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let used = read_json(&tmp.path().join("potential/config.json"));
    assert_eq!(used["potential"]["lambda"], 5.0);
    assert_eq!(used["n"], 12);
    let csv = std::fs::read_to_string(tmp.path().join("potential/potential.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    for line in csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v == 0.0 || v == 5.0, "{line}");
    }
}

#[test]
fn output_root_comes_from_the_environment_unless_configured() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(tmp.path(), &["potential", "-s", "n=10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("potential/manifest.json").exists());
    let other = tmp.path().join("elsewhere");
    let dir = format!("output_dir={}", serde_json::to_string(other.to_str().unwrap()).unwrap());
    let o = fibxy(tmp.path(), &["potential", "-s", "n=10", "-s", &dir]);
    assert_eq!(o.status.code(), Some(0));
    assert!(other.join("potential/manifest.json").exists());
}

fn listed_files(dir: &Path) -> BTreeSet<String> {
    read_manifest(dir).unwrap().unwrap().files.into_iter().map(|f| f.path).collect()
}

fn present_files(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect()
}

#[test]
fn manifest_matches_directory_and_reruns_leave_no_orphans() {
    let tmp = tempfile::tempdir().unwrap();
    let small = ["-s", "n=300", "-s", "t_grid.stop=40", "-s", "t_grid.count=16", "-s", "fit_window=[10,40]"];
    let run = |extra: &[&str]| {
        let mut args = vec!["cone"];
        args.extend_from_slice(&small);
        args.extend_from_slice(extra);
        let o = fibxy(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    run(&[]);
    let dir = tmp.path().join("cone");
    assert_eq!(listed_files(&dir), present_files(&dir));
    assert!(listed_files(&dir).contains("fronts_lower.csv"));
    run(&["-s", r#"cone.quantities=["spin"]"#]);
    assert_eq!(listed_files(&dir), present_files(&dir));
    assert!(!dir.join("fronts_lower.csv").exists());
    let manifest = read_manifest(&dir).unwrap().unwrap();
    let fits = manifest.files.iter().find(|f| f.path == "cone_fits.json").unwrap();
    assert_eq!(fits.rows, 2);
    assert_eq!(manifest.config_hash.len(), 64);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let common = [
        "-s", "n=300", "-s", "t_grid.stop=40", "-s", "t_grid.count=16", "-s", "fit_window=[10,40]",
        "-s", "dimer.n=400", "-s", "dimer.ensemble_size=8", "-s", "dimer.t_grid.stop=40", "-s", "dimer.t_grid.count=17",
    ];
    let mut hashes = Vec::new();
    for jobs in ["1", "4"] {
        let root = tmp.path().join(format!("jobs{jobs}"));
        for cmd in ["cone", "transport", "dimer"] {
            let mut args = vec![cmd, "-s"];
            let j = format!("jobs={jobs}");
            args.push(&j);
            args.extend_from_slice(&common);
            let o = fibxy(&root, &args);
            assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        }
        hashes.push(root);
    }
    for cmd in ["cone", "transport", "dimer"] {
        let a = hashes[0].join(cmd);
        let b = hashes[1].join(cmd);
        let ma = read_manifest(&a).unwrap().unwrap();
        let mb = read_manifest(&b).unwrap().unwrap();
        assert_eq!(ma.config_hash, mb.config_hash);
        assert_eq!(ma.files, mb.files);
        for f in &ma.files {
            let x = std::fs::read(a.join(&f.path)).unwrap();
            let y = std::fs::read(b.join(&f.path)).unwrap();
            assert!(x == y, "{cmd}/{} differs between 1 and 4 threads", f.path);
        }
    }
}

#[test]
fn free_chain_cone_has_unit_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(
        tmp.path(),
        &[
            "cone", "-s", "potential.lambda=0", "-s", "n=1300", "-s", "t_grid.start=10", "-s", "t_grid.stop=100",
            "-s", "t_grid.count=30", "-s", "fit_window=[10,100]", "-s", r#"cone.quantities=["fermi"]"#,
            "-s", "cone.thresholds=[1.0]", "-s", "cone.report_threshold=1.0",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fits = read_json(&tmp.path().join("cone/cone_fits.json"));
    let alpha = fits[0]["alpha"].as_f64().unwrap();
    let v = fits[0]["v"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 0.05, "alpha = {alpha}");
    assert!((v - 4.0).abs() < 0.3, "v = {v}");
}

#[test]
fn report_needs_prior_runs_and_then_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(tmp.path(), &["report"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let small = ["-s", "n=600", "-s", "t_grid.stop=100", "-s", "t_grid.count=24", "-s", "fit_window=[10,100]"];
    for cmd in ["cone", "transport", "alphaprime", "report"] {
        let mut args = vec![cmd];
        args.extend_from_slice(&small);
        let o = fibxy(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let r = read_json(&tmp.path().join("report/report.json"));
    assert_eq!(r["pass"], true, "{r}");
}

#[test]
fn tracemap_rejects_non_fibonacci_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(tmp.path(), &["tracemap", "-s", r#"potential={"kind":"iid_random","lambda":1.0}"#]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn boundary_contact_exits_with_numeric_status() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fibxy(tmp.path(), &["cone", "-s", "potential.lambda=0", "-s", "n=100", "-s", "t_grid.stop=300"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fibxy(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(fibxy(tmp.path(), &["no-such-command"]).status.code(), Some(2));
}
