use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use panelcast::panel::{load_csv, ColumnMap, LoadOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_panelcast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Monthly series repeating the same 12 values.
fn write_repeating(path: &Path, ids: &[&str], years: usize) {
    let mut text = String::from("item_id,timestamp,target\n");
    for (k, id) in ids.iter().enumerate() {
        for y in 0..years {
            for m in 0..12 {
                let v = 10.0 * (k + 1) as f64 + ((m * 7) % 12) as f64;
                text.push_str(&format!("{id},{}-{:02}-01,{v}\n", 2010 + y, m + 1));
            }
        }
    }
    fs::write(path, text).unwrap();
}

fn fit_model(dir: &Path, data: &Path, extra: &[&str]) -> PathBuf {
    let model = dir.join("model");
    let mut args = vec!["fit", "--data", s(data), "--prediction-length", "2", "--preset", "fast", "--out", s(&model)];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    model
}

#[test]
fn missing_data_flag_exits_one_with_usage() {
    let out = run(&["fit", "--prediction-length", "3", "--out", "m"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
}

#[test]
fn fit_predict_shape_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["only"], 4);
    let model = fit_model(dir.path(), &data, &[]);
    assert!(model.join("manifest.json").exists());

    let pred = dir.path().join("pred.csv");
    let out = run(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&pred)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&pred).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "item_id,timestamp,mean,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("only,2014-01-01,"));
    assert!(lines[2].starts_with("only,2014-02-01,"));
}

#[test]
fn quantiles_flag_sets_artifact_levels() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a", "b"], 3);
    let model = fit_model(dir.path(), &data, &["--quantiles", "0.1,0.5,0.9"]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(model.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"]["quantile_levels"], serde_json::json!([0.1, 0.5, 0.9]));
}

#[test]
fn corrupted_manifest_names_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a"], 3);
    let model = fit_model(dir.path(), &data, &[]);
    fs::write(model.join("manifest.json"), "{\"format_version\": 1, \"task\": ").unwrap();
    let out = run(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&dir.path().join("p.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(s(&model)), "{err}");
    let line: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(line["exit_code"], 1);
}

#[test]
fn unknown_metric_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a"], 3);
    let out = run(&["fit", "--data", s(&data), "--prediction-length", "2", "--metric", "RMSSE", "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    let model = fit_model(dir.path(), &data, &[]);
    let out = run(&["evaluate", "--model", s(&model), "--data", s(&data), "--metric", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_on_exactly_repeating_data_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a", "b", "c"], 4);
    let model = fit_model(dir.path(), &data, &[]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(model.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["weights"]["weights"]["SeasonalNaive"], 1.0);
    let out = run(&["evaluate", "--model", s(&model), "--data", s(&data), "--metric", "WQL"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "metric=WQL value=0");

    // every seasonal difference is zero, so MASE has no series to average
    let out = run(&["evaluate", "--model", s(&model), "--data", s(&data), "--metric", "MASE"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn short_series_at_evaluate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a"], 3);
    let model = fit_model(dir.path(), &data, &[]);
    let short = dir.path().join("short.csv");
    fs::write(&short, "item_id,timestamp,target\na,2020-01-01,1\na,2020-02-01,2\n").unwrap();
    let out = run(&["evaluate", "--model", s(&model), "--data", s(&short)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predictions_are_byte_identical_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    let mut text = String::from("item_id,timestamp,target\n");
    for id in 0..4 {
        for t in 0..40u32 {
            let v = 100.0 + (id * 13) as f64 + ((t * 7 + id) % 11) as f64 * 1.37 + t as f64 * 0.3;
            text.push_str(&format!("s{id},{}-{:02}-01,{v}\n", 2000 + t / 12, t % 12 + 1));
        }
    }
    fs::write(&data, text).unwrap();
    let model = fit_model(dir.path(), &data, &[]);
    let p1 = dir.path().join("p1.csv");
    let p2 = dir.path().join("p2.csv");
    for p in [&p1, &p2] {
        let out = run(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(p)]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(&p1).unwrap();
    assert_eq!(a, fs::read(&p2).unwrap());

    let opts = LoadOptions {
        columns: ColumnMap { target: Some("mean".into()), ..ColumnMap::default() },
        ..LoadOptions::default()
    };
    let frame = load_csv(&p1, &opts).unwrap();
    let text = String::from_utf8(a).unwrap();
    let printed: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let loaded: Vec<f64> = frame.iter().flat_map(|(_, s)| s.target.clone()).collect();
    assert_eq!(printed, loaded);
}

#[test]
fn json_flag_gives_single_line_records() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_repeating(&data, &["a", "b"], 3);
    let model = fit_model(dir.path(), &data, &[]);
    let out = run(&["--json", "leaderboard", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["leaderboard"][0]["model"], "WeightedEnsemble");
}
