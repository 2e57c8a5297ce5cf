use homlab_cli::config::{Monitor, RunConfig};
use homlab_cli::registry::Registry;
use homlab_cli::runner::run;
use homlab_core::cell::CacheOutcome;
use std::path::Path;
use std::process::{Command, Output};

fn homlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homlab")).env_remove("HOMLAB_OUT").arg("--out").arg(out).args(args).output().unwrap()
}

fn reports(dir: &Path, suffix: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.to_string_lossy().ends_with(suffix)).collect();
    v.sort();
    v
}

#[test]
fn sin1d_rates_config_writes_a_csv_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = homlab(dir.path(), &["run", "--config", "sin1d-rates"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = reports(dir.path(), ".csv").into_iter().find(|p| p.to_string_lossy().contains("sin1d-rates-")).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.lines().count() >= 5, "{text}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("rates") && l.contains("PASS")), "{stdout}");
}

#[test]
fn invalid_lambda_exits_with_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = homlab(dir.path(), &["run", "--config", "sin1d-holder", "--lambda", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0 < lambda < min{m+1-d/p, 1}"), "{err}");
    assert!(reports(dir.path(), ".json").is_empty());
}

#[test]
fn unknown_scenario_and_malformed_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(homlab(dir.path(), &["run", "--scenario", "nope", "--eps", "0.1", "--monitors", "cell"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"scenario\": 1}").unwrap();
    assert_eq!(homlab(dir.path(), &["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(homlab(dir.path(), &["run", "--scenario", "sin1d", "--eps", "0.1", "--monitors", "bogus"]).status.code(), Some(2));
}

#[test]
fn solver_errors_abort_only_the_monitor_and_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("sin1d", vec![0.125, 0.0625, 0.03125], vec![Monitor::Cell, Monitor::Rates]);
    cfg.budget = 10;
    let path = dir.path().join("tiny.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = homlab(dir.path(), &["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("cell") && l.contains("PASS")), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("rates") && l.contains("ERROR")), "{stdout}");
}

#[test]
fn cached_rerun_is_faster_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new("checker-smooth", vec![0.1], vec![Monitor::Cell]);
    let reg = Registry::load(None);
    let first = run(&cfg, &reg, dir.path()).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(5));
    let second = run(&cfg, &reg, dir.path()).unwrap();
    let (o1, t1) = first.cell_stage.unwrap();
    let (o2, t2) = second.cell_stage.unwrap();
    assert_eq!((o1, o2), (CacheOutcome::Miss, CacheOutcome::Hit));
    assert!(t1.as_secs_f64() >= 5.0 * t2.as_secs_f64(), "{t1:?} {t2:?}");
    let a = std::fs::read(&first.outcomes[0].files[1]).unwrap();
    let b = std::fs::read(&second.outcomes[0].files[1]).unwrap();
    assert_ne!(first.outcomes[0].files[1], second.outcomes[0].files[1]);
    assert_eq!(a, b);
    let cleared = homlab(dir.path(), &["clear-cache"]);
    assert_eq!(cleared.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&cleared.stdout).contains("removed 1"));
}

#[test]
fn listing_shows_builtins_user_files_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let user = dir.path().join("scenarios");
    std::fs::create_dir_all(&user).unwrap();
    let mut s = homlab_core::scenario::find_builtin("laminate2d").unwrap();
    s.id = "mine".into();
    std::fs::write(user.join("mine.json"), serde_json::to_string(&s).unwrap()).unwrap();
    std::fs::write(user.join("broken.json"), "[").unwrap();
    let out = homlab(dir.path(), &["list-scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for id in ["constant", "sin1d", "laminate2d", "checker-smooth", "c1theta-bump"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id}: {text}");
    }
    assert!(text.lines().any(|l| l.starts_with("mine") && l.contains("mine.json")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("invalid") && l.contains("broken.json")), "{text}");
    assert!(text.contains("sin1d-rates"));
}

#[test]
fn schema_is_json_and_covers_every_config_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = homlab(dir.path(), &["show-config-schema"]);
    let schema: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let cfg = serde_json::to_value(RunConfig::new("x", vec![0.1], vec![Monitor::Cell])).unwrap();
    for key in cfg.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "{key}");
    }
    let monitors: Vec<&str> = schema["properties"]["monitors"]["items"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(monitors, Monitor::ALL.iter().map(|m| m.name()).collect::<Vec<_>>());
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_homlab"))
        .env("HOMLAB_OUT", dir.path())
        .args(["run", "--scenario", "constant", "--eps", "0.1", "--monitors", "cell", "--no-cache"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(reports(dir.path(), ".json").len(), 1);
    assert!(!dir.path().join("cache").exists());
}
