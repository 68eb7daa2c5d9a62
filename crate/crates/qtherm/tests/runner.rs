use std::fs;
use std::path::Path;
use std::process::Command;

use qtherm::config::{Experiment, ExperimentConfig, FileConfig, Overrides};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut file = FileConfig::parse(text).unwrap();
    file.run.progress = Some(false);
    ExperimentConfig::resolve(
        file,
        Overrides {
            out: Some(out.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap()
}

fn bodies(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect()
}

const STATIC: &str = r#"
experiment = "static-indicator"
[params]
m = 30
seed = 11
[sweep]
k = [24, 40]
[observables]
levels = [0, 3]
"#;

#[test]
fn csv_bodies_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut reference = None;
    for threads in [1, 3, 8] {
        let out = dir.path().join(format!("t{}", threads));
        qtherm::run(&config(STATIC, &out), threads).unwrap();
        let b = bodies(&out);
        assert_eq!(b.len(), 2);
        match &reference {
            None => reference = Some(b),
            Some(r) => assert_eq!(r, &b),
        }
    }
}

#[test]
fn cached_samples_reproduce_fresh_results() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache/");
    let text = format!("{}\n[run]\ncache = {:?}\n", STATIC, cache.to_string_lossy());
    let fresh = dir.path().join("fresh");
    qtherm::run(&config(&text, &fresh), 2).unwrap();
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 2);
    let again = dir.path().join("again");
    qtherm::run(&config(&text, &again), 2).unwrap();
    assert_eq!(bodies(&fresh), bodies(&again));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(again.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["trials"].as_array().unwrap().iter().all(|t| t["from_cache"] == true));

    // smaller M reuses the prefix of the cached file
    let fewer = text.replace("m = 30", "m = 10");
    let out = dir.path().join("fewer");
    qtherm::run(&config(&fewer, &out), 1).unwrap();
    let samples = fs::read_to_string(out.join("static_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 2 * 2 * 10);
}

#[test]
fn single_cache_file_rejects_foreign_params() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("samples.txt");
    let base = format!(
        "experiment = \"sample\"\n[params]\nk = 30\nm = 5\nseed = 3\n[run]\ncache = {:?}\n",
        file.to_string_lossy()
    );
    qtherm::run(&config(&base, &dir.path().join("a")), 1).unwrap();
    let other = base.replace("seed = 3", "seed = 4");
    let err = qtherm::run(&config(&other, &dir.path().join("b")), 1).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{}", err);
    let sweep = format!("{}[sweep]\nk = [30, 40]\n", base);
    let err = qtherm::run(&config(&sweep, &dir.path().join("c")), 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn every_experiment_runs_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for e in Experiment::ALL {
        let k = if e.is_bath() { 21 } else { 20 };
        let text = format!(
            "experiment = \"{}\"\n[params]\nk = {}\ngamma = 0.3\neps0_final = -0.2\nm = 8\n\
             [time]\npoints = 24\nseries = 2\n[observables]\ngamma_points = 3\n",
            e.name(),
            k
        );
        let out = dir.path().join(e.name());
        let report = qtherm::run(&config(&text, &out), 2).unwrap();
        assert!(!report.tables.is_empty());
        for t in &report.tables {
            let text = fs::read_to_string(t).unwrap();
            let header = text.lines().next().unwrap();
            assert!(header.split(',').all(|c| c.contains('[') && c.ends_with(']')), "{}", header);
            assert!(text.lines().count() > 1, "{} is empty", t.display());
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(report.manifest).unwrap()).unwrap();
        assert_eq!(manifest["experiment"], e.name());
        assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qtherm"))
        .args(args)
        .env_remove("QTHERM_THREADS")
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let ok = cli(&["spectrum", "--k", "12", "--out", out]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(Path::new(out).join("spectrum.csv").exists());
    assert!(Path::new(out).join("manifest.json").exists());

    // quench experiments need eps0_final
    assert_eq!(cli(&["quench-series", "--k", "12", "--out", out]).status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "experiment = \"sample\"\n[params]\nwidth = 2\n").unwrap();
    assert_eq!(cli(&["--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    // an impossible acceptance target within 10 trials
    let budget = cli(&["sample", "--k", "60", "--m", "50", "--budget", "10", "--out", out]);
    assert_eq!(budget.status.code(), Some(3), "{}", String::from_utf8_lossy(&budget.stderr));

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "experiment = \"ipr-scan\"\n[sweep]\nk = [10]\ngamma = [0.1, 0.2]\n").unwrap();
    let flags_win = cli(&["--config", cfg.to_str().unwrap(), "--gamma", "0.3", "--out", out]);
    assert!(flags_win.status.success());
    let scan = fs::read_to_string(Path::new(out).join("ipr_scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 2);
    assert!(scan.lines().nth(1).unwrap().starts_with("10,2.9999999999999999e-1,"));
}

#[test]
fn thread_count_from_environment() {
    std::env::set_var("QTHERM_THREADS", "3");
    assert_eq!(qtherm::config::resolve_threads(None).unwrap(), 3);
    assert_eq!(qtherm::config::resolve_threads(Some(5)).unwrap(), 5);
    std::env::set_var("QTHERM_THREADS", "zero");
    assert!(qtherm::config::resolve_threads(None).is_err());
    std::env::remove_var("QTHERM_THREADS");
}
