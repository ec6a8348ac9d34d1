mod common;

use common::{normal, rng, start};
use indexmap::IndexMap;
use panelcast::ensemble::{combine, forward_select, EnsembleError, MemberForecasts};
use panelcast::forecast::{ForecastFrame, QuantileLevels, SeriesForecast};
use panelcast::metrics::EvalMetric;
use panelcast::panel::{Frequency, TimeSeriesFrame, Window};

const H: usize = 5;

struct Instance {
    window: Window,
    actual: Vec<Vec<f64>>,
}

fn instance(seed: u64, n_series: usize) -> Instance {
    let mut g = rng(seed);
    let full: Vec<Vec<f64>> = (0..n_series).map(|_| (0..20 + H).map(|_| 50.0 + 5.0 * normal(&mut g)).collect()).collect();
    let train = TimeSeriesFrame::from_targets(
        Frequency::Yearly,
        start(),
        full.iter().enumerate().map(|(i, y)| (format!("s{i}"), y[..20].to_vec())),
    )
    .unwrap();
    let validation = TimeSeriesFrame::from_targets(
        Frequency::Yearly,
        Frequency::Yearly.advance(start(), 20),
        full.iter().enumerate().map(|(i, y)| (format!("s{i}"), y[20..].to_vec())),
    )
    .unwrap();
    let actual = full.iter().map(|y| y[20..].to_vec()).collect();
    Instance { window: Window { index: 1, train, validation }, actual }
}

fn median_frame(paths: &[Vec<f64>]) -> ForecastFrame {
    let mut f = ForecastFrame::new(Frequency::Yearly, QuantileLevels::new(vec![0.5]).unwrap());
    for (i, p) in paths.iter().enumerate() {
        let s = SeriesForecast { start: Frequency::Yearly.advance(start(), 20), mean: p.clone(), quantiles: vec![p.clone()] };
        f.series.insert(format!("s{i}"), s);
    }
    f
}

fn shifted(actual: &[Vec<f64>], mut by: impl FnMut(usize, usize) -> f64) -> Vec<Vec<f64>> {
    actual.iter().enumerate().map(|(i, y)| y.iter().enumerate().map(|(t, v)| v + by(i, t)).collect()).collect()
}

/// Σ|y − ŷ| / Σ|y| over the panel.
fn hand_loss(actual: &[Vec<f64>], f: &[Vec<f64>]) -> f64 {
    let num: f64 = actual.iter().flatten().zip(f.iter().flatten()).map(|(y, p)| (y - p).abs()).sum();
    num / actual.iter().flatten().map(|y| y.abs()).sum::<f64>()
}

fn blend(members: &[Vec<Vec<f64>>], w: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; H]; members[0].len()];
    for (m, &wt) in members.iter().zip(w) {
        for (o, p) in out.iter_mut().zip(m) {
            for (a, b) in o.iter_mut().zip(p) {
                *a += wt * b;
            }
        }
    }
    out
}

/// The greedy loop written out directly: add the member with the lowest
/// loss, keep the first best bag.
fn greedy_oracle(actual: &[Vec<f64>], members: &[Vec<Vec<f64>>], steps: usize) -> Vec<f64> {
    let mut counts = vec![0usize; members.len()];
    let mut best = (f64::INFINITY, vec![]);
    for n in 1..=steps {
        let mut pick = (f64::INFINITY, 0);
        for m in 0..members.len() {
            counts[m] += 1;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            let l = hand_loss(actual, &blend(members, &w));
            if l < pick.0 {
                pick = (l, m);
            }
            counts[m] -= 1;
        }
        counts[pick.1] += 1;
        if pick.0 < best.0 {
            best = (pick.0, counts.iter().map(|&c| c as f64 / n as f64).collect());
        }
    }
    best.1
}

fn select(inst: &Instance, frames: &[(&str, ForecastFrame)], steps: usize) -> panelcast::EnsembleWeights {
    let windows: Vec<Vec<ForecastFrame>> = frames.iter().map(|(_, f)| vec![f.clone()]).collect();
    let members: Vec<MemberForecasts> =
        frames.iter().zip(&windows).map(|((n, _), w)| MemberForecasts { name: n, windows: w }).collect();
    forward_select(&members, std::slice::from_ref(&inst.window), EvalMetric::Wql, 1, steps).unwrap()
}

#[test]
fn no_members_is_an_error() {
    let inst = instance(0, 2);
    let r = forward_select(&[], std::slice::from_ref(&inst.window), EvalMetric::Wql, 1, 10);
    assert!(matches!(r, Err(EnsembleError::NoSuccessfulModels)));
}

#[test]
fn single_member_gets_everything() {
    let inst = instance(1, 3);
    for steps in [1, 7, 100] {
        let w = select(&inst, &[("A", median_frame(&shifted(&inst.actual, |_, _| 1.5)))], steps);
        assert_eq!(w.get("A"), 1.0);
    }
}

#[test]
fn dominating_member_takes_all_weight() {
    let inst = instance(2, 4);
    let mut g = rng(20);
    let a = shifted(&inst.actual, |_, _| 0.2 * normal(&mut g));
    let b = shifted(&inst.actual, |i, t| 8.0 + (i + t) as f64);
    let oracle = greedy_oracle(&inst.actual, &[a.clone(), b.clone()], 100);
    let w = select(&inst, &[("A", median_frame(&a)), ("B", median_frame(&b))], 100);
    assert_eq!(oracle, vec![1.0, 0.0]);
    assert_eq!(vec![w.get("A"), w.get("B")], oracle);
}

#[test]
fn opposite_biases_split_evenly() {
    let inst = instance(3, 3);
    let c = 2.5;
    let a = shifted(&inst.actual, |_, _| c);
    let b = shifted(&inst.actual, |_, _| -c);
    let steps = 100;
    let w = select(&inst, &[("A", median_frame(&a)), ("B", median_frame(&b))], steps);

    // simplex grid at resolution 0.01
    let grid_best = (0..=100)
        .map(|k| k as f64 / 100.0)
        .min_by(|x, y| {
            let lx = hand_loss(&inst.actual, &blend(&[a.clone(), b.clone()], &[*x, 1.0 - x]));
            let ly = hand_loss(&inst.actual, &blend(&[a.clone(), b.clone()], &[*y, 1.0 - y]));
            lx.total_cmp(&ly)
        })
        .unwrap();
    assert!((grid_best - 0.5).abs() < 1e-12);
    assert!((w.get("A") - grid_best).abs() <= 1.0 / steps as f64);
    assert!((w.get("B") - (1.0 - grid_best)).abs() <= 1.0 / steps as f64);
}

#[test]
fn greedy_matches_hand_loop_on_three_members() {
    for seed in 0..5 {
        let inst = instance(100 + seed, 3);
        let mut g = rng(seed);
        let members: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|_| {
                let bias = 4.0 * normal(&mut g);
                shifted(&inst.actual, |_, _| bias + normal(&mut g))
            })
            .collect();
        let frames: Vec<(&str, ForecastFrame)> =
            ["A", "B", "C"].into_iter().zip(&members).map(|(n, m)| (n, median_frame(m))).collect();
        let w = select(&inst, &frames, 30);
        let oracle = greedy_oracle(&inst.actual, &members, 30);
        for (name, o) in ["A", "B", "C"].iter().zip(&oracle) {
            assert!((w.get(name) - o).abs() < 1e-12, "seed {seed}: {name} {} vs {o}", w.get(name));
        }
    }
}

#[test]
fn member_order_does_not_matter_without_ties() {
    let inst = instance(4, 3);
    let mut g = rng(44);
    let paths: Vec<Vec<Vec<f64>>> =
        (0..3).map(|k| shifted(&inst.actual, |_, _| (k as f64 - 1.0) * 3.0 + normal(&mut g))).collect();
    let names = ["A", "B", "C"];
    let forward: Vec<(&str, ForecastFrame)> = names.iter().zip(&paths).map(|(n, p)| (*n, median_frame(p))).collect();
    let mut backward = forward.clone();
    backward.reverse();
    let w1 = select(&inst, &forward, 50);
    let w2 = select(&inst, &backward, 50);
    for n in names {
        assert_eq!(w1.get(n), w2.get(n));
    }
    assert!((w1.score - w2.score).abs() <= 1e-12 * w1.score.abs());
}

#[test]
fn weights_are_convex_and_combination_is_exact() {
    let inst = instance(5, 2);
    let a = median_frame(&shifted(&inst.actual, |_, _| 1.0));
    let b = median_frame(&shifted(&inst.actual, |_, _| -3.0));
    let w = select(&inst, &[("A", a.clone()), ("B", b.clone())], 100);
    assert!(w.weights.values().all(|&v| v >= 0.0));
    assert!((w.weights.values().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut members = IndexMap::new();
    members.insert("A".to_string(), a.clone());
    members.insert("B".to_string(), b.clone());
    let out = combine(&w, &members).unwrap();
    for (id, s) in &out.series {
        for t in 0..H {
            let want = w.get("A") * a.series[id].mean[t] + w.get("B") * b.series[id].mean[t];
            assert!((s.mean[t] - want).abs() < 1e-12);
        }
    }
}
