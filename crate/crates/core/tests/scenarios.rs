use std::path::PathBuf;

use techgrowth::longrun::Regime;
use techgrowth::report::{run, CheckStatus, RunOptions};
use techgrowth::scenario::{
    builtin_scenario, builtin_scenarios, load_scenario, scenario_files, write_scenario,
};
use techgrowth::{Error, ErrorKind};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

#[test]
fn shipped_files_match_the_builtins() {
    for s in builtin_scenarios() {
        let loaded = load_scenario(shipped(&s.name)).unwrap();
        assert_eq!(loaded, s, "{}", s.name);
    }
}

#[test]
fn every_shipped_file_loads() {
    let dir = shipped("x").parent().unwrap().to_path_buf();
    let files = scenario_files(&dir).unwrap();
    assert!(files.len() >= 5);
    for f in files {
        load_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

#[test]
fn write_then_load_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for s in builtin_scenarios() {
        let path = dir.path().join(format!("{}.json", s.name));
        write_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario("/nonexistent/scenario.json").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.kind(), ErrorKind::Io);
}

#[test]
fn runs_are_byte_identical() {
    let s = builtin_scenario("fig4-transitions").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let opts = RunOptions::default();
    run(&s, a.path(), &opts).unwrap();
    run(&s, b.path(), &opts).unwrap();
    for ext in ["csv", "svg", "report.txt"] {
        let file = format!("fig4-transitions.{ext}");
        let x = std::fs::read(a.path().join(&file)).unwrap();
        let y = std::fs::read(b.path().join(&file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn run_writes_all_outputs_and_cross_checks() {
    let dir = tempfile::tempdir().unwrap();
    for s in builtin_scenarios() {
        let report = run(&s, dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(report.files.len(), 4);
        for f in &report.files {
            assert!(f.exists(), "{}", f.display());
        }
        if report.prediction.regime == Regime::Exponential {
            assert_eq!(report.cross_check.status, CheckStatus::Pass, "{}", s.name);
        }
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("{}.report.json", s.name))).unwrap(),
        )
        .unwrap();
        assert_eq!(json["scenario"], s.name.as_str());
        assert!(!json["assumed"].as_array().unwrap().is_empty());
    }
}

#[test]
fn one_way_run_decays_and_circular_run_converges() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        horizon: Some(200.0),
        ..RunOptions::default()
    };
    let oneway = run(
        &builtin_scenario("fig12-oneway").unwrap(),
        dir.path(),
        &opts,
    )
    .unwrap();
    assert_eq!(oneway.prediction.regime, Regime::Polynomial);
    assert!(oneway.realized.terminal_growth < 0.05);

    let circular = run(
        &builtin_scenario("fig12-circular").unwrap(),
        dir.path(),
        &opts,
    )
    .unwrap();
    assert_eq!(circular.prediction.regime, Regime::Exponential);
    let g_inf = circular.prediction.candidates[0].growth_rate;
    assert!((circular.realized.terminal_growth - g_inf).abs() <= 1e-3 * g_inf);
    assert!(circular.convergence.converged);
}

#[test]
fn report_text_numbers_technologies_from_one() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &builtin_scenario("fig12-circular").unwrap(),
        dir.path(),
        &RunOptions::default(),
    )
    .unwrap();
    let text = std::fs::read_to_string(dir.path().join("fig12-circular.report.txt")).unwrap();
    assert!(text.contains("cores: {1,2,3,4}"));
    assert!(text.contains("regime: exponential"));
    assert!(text.contains("defaults (not documented values): nu, alpha"));
}
