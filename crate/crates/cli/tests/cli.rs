use std::path::Path;
use std::process::{Command, Output};

use wtisent::features::FeatureSetId;
use wtisent::report::{generate, replay_config, write_synthetic_inputs, RunConfig, RunLayout, SyntheticSpec};
use wtisent::tpe::{ParamKind, ParamSpec, SearchSpace};

fn wtisent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtisent"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic inputs plus a small config written into `dir`.
fn prepare_run(dir: &Path) -> RunConfig {
    let spec = SyntheticSpec {
        n_weeks: 80,
        seed: 5,
        ..Default::default()
    };
    let mut cfg = replay_config(5, dir, &spec);
    cfg.sets = vec![FeatureSetId::Gpt, FeatureSetId::Tradition];
    cfg.explain.report_set = FeatureSetId::Gpt;
    cfg.cv.k = 3;
    cfg.tpe.n_trials = 4;
    cfg.tpe.n_startup = 2;
    cfg.space = Some(
        SearchSpace::new(vec![
            ParamSpec::new("num_trees", ParamKind::IntegerUniform, 10.0, 30.0),
            ParamSpec::new("max_depth", ParamKind::IntegerUniform, 1.0, 3.0),
        ])
        .unwrap(),
    );
    let data = generate(&spec).unwrap();
    write_synthetic_inputs(&data, &dir.join("corpus"), &dir.join("corpus/prices.csv")).unwrap();
    cfg.save().unwrap();
    cfg
}

#[test]
fn stages_run_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    prepare_run(dir.path());
    let out = dir.path().to_str().unwrap();
    let layout = RunLayout::new(dir.path());
    for (stage, product) in [
        ("fetch", layout.articles()),
        ("extract", layout.vectors()),
        ("features", layout.features()),
        ("evaluate", layout.metrics()),
        ("explain", layout.explain_summary()),
        ("report", layout.report_dir().join("metrics_table.csv")),
    ] {
        let o = wtisent(&[stage, "--out", out]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
        assert!(product.exists(), "{stage} wrote no {}", product.display());
    }
    let table = std::fs::read_to_string(layout.report_dir().join("metrics_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    // re-running extract is served from the reply cache
    let o = wtisent(&["extract", "--out", out]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("(0 adapter calls"), "{text}");
}

#[test]
fn set_override_narrows_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    prepare_run(dir.path());
    let out = dir.path().to_str().unwrap();
    for stage in ["fetch", "extract", "features"] {
        assert!(wtisent(&[stage, "--out", out]).status.success());
    }
    let o = wtisent(&["evaluate", "--out", out, "--sets", "gpt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(RunLayout::new(dir.path()).metrics()).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.starts_with("gpt,")));
    let saved = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved.sets, vec![FeatureSetId::Gpt]);
}

#[test]
fn missing_upstream_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = wtisent(&["evaluate", "--out", dir.path().to_str().unwrap(), "--stub"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("kind=missing_input"), "{err}");
    assert!(err.contains("weekly_features.csv"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(wtisent(&["evaluate", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(wtisent(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(wtisent(&["evaluate", "--sets", "gpt,bert"]).status.code(), Some(2));
    assert_eq!(wtisent(&["evaluate", "--seed", "minus-one"]).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\n[cv]\nk = 1\n").unwrap();
    let o = wtisent(&["features", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=config"), "{}", stderr(&o));
}

#[test]
fn help_lists_every_stage() {
    let o = wtisent(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for stage in ["fetch", "extract", "features", "evaluate", "explain", "report", "replay"] {
        assert!(text.contains(stage), "{stage}");
    }
}
