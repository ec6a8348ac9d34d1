mod common;

use std::time::Duration;

use common::{ar1, frame, mixed_panel, rng};
use panelcast::backtest::{allocate_budget, evaluate_candidates, Candidate, Forecaster, ModelStatus};
use panelcast::metrics::EvalMetric;
use panelcast::models::global::{GlobalSpec, Strategy};
use panelcast::models::local::LocalModelSpec;
use panelcast::models::{FitContext, ModelError, ModelSpec, TrainedMember};
use panelcast::panel::{split_last, Frequency, TimeSeriesFrame};
use panelcast::TaskConfig;

struct Failing;

impl Forecaster for Failing {
    fn name(&self) -> &str {
        "Failing"
    }
    fn fit(&self, _: &TimeSeriesFrame, _: &FitContext) -> Result<TrainedMember, ModelError> {
        Err(ModelError::Other("always fails".into()))
    }
}

struct Panicking;

impl Forecaster for Panicking {
    fn name(&self) -> &str {
        "Panicking"
    }
    fn fit(&self, _: &TimeSeriesFrame, _: &FitContext) -> Result<TrainedMember, ModelError> {
        panic!("boom")
    }
}

fn local(name: &str, spec: LocalModelSpec) -> Candidate {
    Candidate::new(name, ModelSpec::Local(spec))
}

fn task(h: usize, metric: EvalMetric, windows: usize) -> TaskConfig {
    TaskConfig { eval_metric: metric, num_windows: windows, ..TaskConfig::new(h) }
}

#[test]
fn seasonal_naive_alone_is_ok() {
    let f = mixed_panel(1, 5, 30, Frequency::Monthly);
    let sn = local("SeasonalNaive", LocalModelSpec::seasonal_naive());
    let report = evaluate_candidates(&[&sn], &f, &task(6, EvalMetric::Wql, 1), None).unwrap();
    assert_eq!(report.models.len(), 1);
    assert_eq!(report.models[0].status, ModelStatus::Ok);
    assert!(report.models[0].score.unwrap().is_finite());
}

#[test]
fn failing_and_panicking_candidates_are_isolated() {
    let f = mixed_panel(2, 6, 36, Frequency::Monthly);
    let sn = local("SeasonalNaive", LocalModelSpec::seasonal_naive());
    let naive = local("Naive", LocalModelSpec::Naive);
    let cands: [&dyn Forecaster; 4] = [&sn, &Failing, &Panicking, &naive];
    let report = evaluate_candidates(&cands, &f, &task(6, EvalMetric::Mase, 2), None).unwrap();
    let status: Vec<&str> = report.models.iter().map(|m| m.status.label()).collect();
    assert_eq!(status, ["ok", "failed", "failed", "ok"]);
    assert!(report.get("Failing").unwrap().score.is_none());
    match &report.get("Panicking").unwrap().status {
        ModelStatus::Failed(reason) => assert!(reason.contains("boom")),
        other => panic!("{other:?}"),
    }

    // dropping the failures leaves every other score untouched
    let clean = evaluate_candidates(&[&sn, &naive], &f, &task(6, EvalMetric::Mase, 2), None).unwrap();
    for m in &clean.models {
        let full = report.get(&m.name).unwrap();
        assert_eq!(m.score.unwrap().to_bits(), full.score.unwrap().to_bits());
        assert_eq!(m.window_scores, full.window_scores);
    }
}

#[test]
fn only_failures_is_an_error() {
    let f = mixed_panel(2, 3, 20, Frequency::Monthly);
    assert!(evaluate_candidates(&[&Failing], &f, &task(4, EvalMetric::Wql, 1), None).is_err());
}

/// Hand-rolled MASE: mean over series of mean |y - f| divided by the
/// in-sample mean absolute lag-`s` difference.
fn hand_mase(actual: &[Vec<f64>], forecast: &[Vec<f64>], history: &[Vec<f64>], s: usize) -> f64 {
    let mut total = 0.0;
    for ((a, f), h) in actual.iter().zip(forecast).zip(history) {
        let scale = (s..h.len()).map(|t| (h[t] - h[t - s]).abs()).sum::<f64>() / (h.len() - s) as f64;
        total += a.iter().zip(f).map(|(y, p)| (y - p).abs()).sum::<f64>() / a.len() as f64 / scale;
    }
    total / actual.len() as f64
}

#[test]
fn true_model_class_wins_on_ar1_panel() {
    let mut g = rng(17);
    let ys: Vec<Vec<f64>> = (0..40).map(|_| ar1(&mut g, 120, 100.0, 0.3, 1.0)).collect();
    let f = frame(Frequency::Yearly, ys);
    let h = 8;
    let ar = Candidate::new(
        "AR1",
        ModelSpec::Global(GlobalSpec { lags: Some(vec![1]), scaling: false, ..GlobalSpec::new(Strategy::Recursive) }),
    );
    let naive = local("Naive", LocalModelSpec::Naive);
    let t = task(h, EvalMetric::Mase, 1);
    let report = evaluate_candidates(&[&ar, &naive], &f, &t, None).unwrap();
    let ar_score = report.get("AR1").unwrap().score.unwrap();
    let naive_score = report.get("Naive").unwrap().score.unwrap();
    assert!(ar_score < naive_score, "{ar_score} vs {naive_score}");

    // the same numbers from an independent pipeline
    let (train, test) = split_last(&f, h).unwrap();
    let ctx = FitContext::new(h, t.quantile_levels.clone());
    let actual: Vec<Vec<f64>> = test.iter().map(|(_, s)| s.target.clone()).collect();
    let history: Vec<Vec<f64>> = train.iter().map(|(_, s)| s.target.clone()).collect();
    for (cand, reported) in [(&ar, ar_score), (&naive, naive_score)] {
        let fc = cand.fit(&train, &ctx).unwrap().forecast_fitted(&train, &ctx).unwrap();
        let points: Vec<Vec<f64>> = train.ids().map(|id| fc.point(id).unwrap().to_vec()).collect();
        let oracle = hand_mase(&actual, &points, &history, 1);
        assert!((oracle - reported).abs() < 1e-12 * oracle.max(1.0), "{oracle} vs {reported}");
    }
}

#[test]
fn out_of_fold_forecasts_follow_their_training_data() {
    let f = mixed_panel(6, 8, 48, Frequency::Monthly);
    let sn = local("SeasonalNaive", LocalModelSpec::seasonal_naive());
    let ets = local("ETS", LocalModelSpec::ets());
    let report = evaluate_candidates(&[&sn, &ets], &f, &task(6, EvalMetric::Wql, 3), None).unwrap();
    assert_eq!(report.windows.len(), 3);
    for oof in &report.oof {
        assert_eq!(oof.len(), 3);
        for (fc, w) in oof.iter().zip(&report.windows) {
            for (id, ts, _, _) in fc.rows() {
                let last = *w.train.timestamps(id).unwrap().last().unwrap();
                assert!(ts > last);
            }
        }
    }
}

#[test]
fn budget_recurrence_by_hand() {
    assert_eq!(allocate_budget(Duration::from_secs(100), 4), Duration::from_secs(25));
    assert_eq!(allocate_budget(Duration::ZERO, 3), Duration::ZERO);
    // 60 s, three models that each finish in 5 s
    let mut remaining = 60.0;
    let mut caps = Vec::new();
    for left in (1..=3).rev() {
        caps.push(allocate_budget(Duration::from_secs_f64(remaining), left).as_secs_f64());
        remaining -= 5.0;
    }
    assert_eq!(caps, vec![20.0, 27.5, 50.0]);
}

#[test]
fn zero_budget_runs_only_the_first_candidate() {
    let f = mixed_panel(3, 4, 30, Frequency::Monthly);
    let sn = local("SeasonalNaive", LocalModelSpec::seasonal_naive());
    let naive = local("Naive", LocalModelSpec::Naive);
    let theta = local("Theta", LocalModelSpec::theta());
    let report = evaluate_candidates(&[&sn, &naive, &theta], &f, &task(6, EvalMetric::Wql, 1), Some(Duration::ZERO)).unwrap();
    let status: Vec<&str> = report.models.iter().map(|m| m.status.label()).collect();
    assert_eq!(status, ["ok", "skipped", "skipped"]);
}
