mod common;

use common::{linear_net, rng, uniform_vec};
use fad_core::attribution::{BaselineVector, FeatureKind, ImportanceRanking};
use fad_core::fadcurve::{
    compare_curves, fad_curve, n_auc, trapezoid_auc, trapezoid_auc_points, CurvePoint, DropSchedule, FadCurve,
};
use fad_core::nncore::{train, GradientTarget, LabeledSlice, NetworkSpec, TrainConfig};
use fad_core::pipeline::{
    classification_metrics, generate_vital_few, run_fad_analysis, stratified_kfold, Aggregation, FadConfig, Method,
    RankingMode, Standardizer, TabularDataset, VitalFewConfig,
};
use fad_core::FadError;
use proptest::prelude::*;
use rand::Rng;

fn small_train() -> TrainConfig {
    TrainConfig { epochs: 25, ..TrainConfig::default() }
}

#[test]
fn first_point_is_undropped_accuracy() {
    let net = linear_net(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![0.0, 0.0], GradientTarget::Probability);
    let xs = vec![vec![1.0, 0.5], vec![-2.0, 0.5], vec![0.3, 0.3], vec![-0.1, -0.1]];
    let rankings: Vec<ImportanceRanking> = xs.iter().map(|_| ImportanceRanking::from_scores(&[1.0, 0.0])).collect();
    let schedule = DropSchedule::with_tail(2, 20.0).unwrap();
    let curve = fad_curve(&net, &xs, &rankings, &BaselineVector::zeros(2), 0, &schedule, "c", "m").unwrap();
    assert_eq!(curve.points[0].percent, 0.0);
    assert_eq!(curve.points[0].metric, 0.5);
    // Dropping everything lands on the tied logits, which predict class 0.
    assert_eq!(curve.points.last().unwrap().metric, 1.0);
    assert!(matches!(
        fad_curve(&net, &[], &[], &BaselineVector::zeros(2), 0, &schedule, "c", "m"),
        Err(FadError::Degenerate(_))
    ));
}

#[test]
fn constant_model_gives_flat_curve_at_one() {
    let net = linear_net(vec![vec![0.0; 3], vec![0.0; 3]], vec![2.0, 0.0], GradientTarget::Probability);
    let mut r = rng(1);
    let xs: Vec<Vec<f64>> = (0..10).map(|_| uniform_vec(&mut r, 3, 1.0)).collect();
    let rankings: Vec<ImportanceRanking> = xs.iter().map(|x| ImportanceRanking::from_scores(x)).collect();
    let schedule = DropSchedule::with_tail(3, 20.0).unwrap();
    let curve = fad_curve(&net, &xs, &rankings, &BaselineVector::zeros(3), 0, &schedule, "c", "m").unwrap();
    assert!(curve.points.iter().all(|p| p.metric == 1.0));
    assert_eq!(trapezoid_auc(&curve, 20.0).unwrap(), 20.0);
    let entries = compare_curves(&[&curve, &curve], 20.0).unwrap();
    assert!(entries.iter().all(|e| e.n_auc == 1.0));
}

#[test]
fn oracle_ranking_never_gains_accuracy_by_twenty_percent() {
    for seed in 0..3 {
        let syn = generate_vital_few(&VitalFewConfig { instances: 300, seed, ..VitalFewConfig::default() }).unwrap();
        let ds = &syn.dataset;
        let scaler = Standardizer::fit(ds.rows(), ds.kinds()).unwrap();
        let xs = scaler.apply_all(ds.rows());
        let spec = NetworkSpec::new(ds.feature_count(), vec![16], ds.class_count());
        let net = train(LabeledSlice::new(&xs, ds.labels()).unwrap(), None, &spec, &small_train()).unwrap().network;
        let mut oracle = vec![0.0; ds.feature_count()];
        syn.informative.iter().for_each(|&j| oracle[j] = 1.0);
        let schedule = DropSchedule::with_tail(ds.feature_count(), 20.0).unwrap();
        for class in 0..ds.class_count() {
            let members: Vec<Vec<f64>> =
                (0..ds.len()).filter(|&i| ds.labels()[i] == class).map(|i| xs[i].clone()).collect();
            let rankings = vec![ImportanceRanking::from_scores(&oracle); members.len()];
            let curve =
                fad_curve(&net, &members, &rankings, &BaselineVector::zeros(ds.feature_count()), class, &schedule, "c", "oracle")
                    .unwrap();
            assert!(curve.value_at(20.0).unwrap() <= curve.points[0].metric);
        }
    }
}

#[test]
fn bounded_schedule_covers_beta() {
    let s = DropSchedule::bounded(549, 20.0).unwrap();
    assert_eq!(*s.counts().last().unwrap(), 110);
    assert_eq!(s.counts().len(), 111);
    let tail = DropSchedule::with_tail(50, 20.0).unwrap();
    let p = tail.percents();
    assert_eq!(p[10], 20.0);
    assert_eq!(*p.last().unwrap(), 100.0);
}

fn piecewise_linear() -> impl Strategy<Value = Vec<CurvePoint>> {
    prop::collection::vec((0.5f64..8.0, 0.0f64..1.0), 2..12).prop_map(|steps| {
        let mut pct = 0.0;
        let mut pts = vec![CurvePoint { percent: 0.0, metric: steps[0].1 }];
        for (dx, m) in steps.into_iter().skip(1) {
            pct += dx;
            pts.push(CurvePoint { percent: pct, metric: m });
        }
        pts
    })
}

proptest! {
    #[test]
    fn trapezoid_matches_symbolic_integral(pts in piecewise_linear()) {
        let beta = pts.last().unwrap().percent;
        prop_assume!(beta <= 100.0);
        // Integral of each linear piece in closed form, summed in order.
        let symbolic: f64 = pts.windows(2).map(|w| (w[1].percent - w[0].percent) * (w[0].metric + w[1].metric) / 2.0).sum();
        let auc = trapezoid_auc_points(&pts, beta).unwrap();
        prop_assert!((auc - symbolic).abs() <= 1e-12 * symbolic.abs().max(1.0));
    }

    #[test]
    fn n_auc_stays_in_unit_interval(curves in prop::collection::vec(piecewise_linear(), 1..4), frac in 0.05f64..1.0) {
        let reach = curves.iter().map(|c| c.last().unwrap().percent).fold(f64::INFINITY, f64::min);
        let beta = (reach * frac).min(100.0);
        let built: Vec<FadCurve> = curves
            .into_iter()
            .map(|pts| FadCurve::new(pts, 0, "c", "m", None, 1).unwrap())
            .collect();
        let refs: Vec<&FadCurve> = built.iter().collect();
        match compare_curves(&refs, beta) {
            Ok(entries) => {
                for e in entries {
                    prop_assert!(e.n_auc > 0.0 && e.n_auc <= 1.0);
                }
            }
            Err(FadError::Excluded(_)) => {}
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

#[test]
fn n_auc_excludes_zero_maximum() {
    assert!(matches!(n_auc(0.0, 20.0, 0.0), Err(FadError::Excluded(_))));
    assert!(matches!(n_auc(1.0, 20.0, -1.0), Err(FadError::Excluded(_))));
}

#[test]
fn folds_partition_and_stratify() {
    let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 10 >= 7)).collect();
    let plan = stratified_kfold(&labels, 2, 5, 3).unwrap();
    let mut seen = vec![0; labels.len()];
    for f in 0..5 {
        let test = plan.test_indices(f);
        let train = plan.train_indices(f);
        assert!(test.iter().all(|i| !train.contains(i)));
        assert_eq!(test.len() + train.len(), labels.len());
        test.iter().for_each(|&i| seen[i] += 1);
        let zeros = test.iter().filter(|&&i| labels[i] == 0).count() as i64;
        assert!((zeros - 14).abs() <= 1 && (test.len() as i64 - zeros - 6).abs() <= 1);
    }
    assert!(seen.iter().all(|&c| c == 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_f1_between_class_extremes(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)) {
        let (pred, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = classification_metrics(&pred, &labels, 4).unwrap();
        let lo = m.rows.iter().map(|r| r.f1).fold(f64::INFINITY, f64::min);
        let hi = m.rows.iter().map(|r| r.f1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m.weighted_f1 >= lo - 1e-12 && m.weighted_f1 <= hi + 1e-12);
    }
}

#[test]
fn noise_only_features_give_chance_accuracy() {
    let syn = generate_vital_few(&VitalFewConfig { instances: 600, seed: 4, ..VitalFewConfig::default() }).unwrap();
    let ds = &syn.dataset;
    let noise: Vec<usize> = (0..ds.feature_count()).filter(|j| !syn.informative.contains(j)).collect();
    let fit = |data: &TabularDataset| -> f64 {
        let xs = Standardizer::fit(data.rows(), data.kinds()).unwrap().apply_all(data.rows());
        let (train_x, test_x) = xs.split_at(400);
        let (train_y, test_y) = data.labels().split_at(400);
        let spec = NetworkSpec::new(data.feature_count(), vec![16], data.class_count());
        let net = train(LabeledSlice::new(train_x, train_y).unwrap(), None, &spec, &small_train()).unwrap().network;
        let hits = test_x.iter().zip(test_y).filter(|(x, &y)| net.predict(x).unwrap() == y).count();
        hits as f64 / test_x.len() as f64
    };
    let all = fit(ds);
    let noise_only = fit(&ds.select_features(&noise).unwrap());
    assert!(all > 0.8, "all-feature accuracy {all}");
    assert!((noise_only - 1.0 / 3.0).abs() <= 0.1, "noise-only accuracy {noise_only}");
}

fn small_planted(seed: u64) -> (TabularDataset, Vec<usize>) {
    let syn = generate_vital_few(&VitalFewConfig { instances: 150, features: 10, seed, ..VitalFewConfig::default() })
        .unwrap();
    (syn.dataset, syn.informative)
}

#[test]
fn analysis_is_deterministic_and_thread_independent() {
    let (ds, truth) = small_planted(2);
    let fad = FadConfig {
        folds: 3,
        methods: vec![Method::Ig, Method::Shapley, Method::Oracle, Method::Random],
        ground_truth: Some(truth),
        seed: 9,
        ..FadConfig::default()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_fad_analysis(&ds, &small_train(), &fad).unwrap());
    let b = four.install(|| run_fad_analysis(&ds, &small_train(), &fad).unwrap());
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert_eq!(a.curves, b.curves);
    assert_eq!(a.attributions, b.attributions);
    // Exact Shapley is auto-selected at ten features.
    assert!(a.attributions.iter().filter(|r| r.method == "Shapley").count() == ds.len());
    assert_eq!(a.folds.iter().map(|f| f.test_size).sum::<usize>(), ds.len());
    assert_eq!(a.report.rows.len(), ds.class_count());
    assert_eq!(a.curves.len(), ds.class_count() * 4);
}

#[test]
fn empty_class_is_excluded_and_fold_average_works() {
    let (ds, _) = small_planted(3);
    let mut names = ds.class_names().to_vec();
    names.push("unused".into());
    let ds = TabularDataset::new(
        ds.rows().to_vec(),
        ds.kinds().to_vec(),
        ds.labels().to_vec(),
        ds.feature_names().to_vec(),
        names,
    )
    .unwrap();
    let fad = FadConfig {
        folds: 3,
        methods: vec![Method::Ig, Method::Random],
        aggregation: Aggregation::FoldAverage,
        ranking: RankingMode::ClassGlobal,
        ..FadConfig::default()
    };
    let a = run_fad_analysis(&ds, &small_train(), &fad).unwrap();
    assert_eq!(a.report.excluded.len(), 1);
    assert_eq!(a.report.excluded[0].class_name, "unused");
    assert_eq!(a.report.aggregation, "fold-average");
    assert_eq!(a.fold_curves.len(), 3 * 3 * 2);
}

#[test]
fn oracle_needs_ground_truth() {
    let (ds, _) = small_planted(4);
    let fad = FadConfig { methods: vec![Method::Oracle], ..FadConfig::default() };
    assert!(matches!(run_fad_analysis(&ds, &small_train(), &fad), Err(FadError::Config(_))));
}

#[test]
fn binary_features_keep_zero_baseline() {
    let mut r = rng(8);
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![r.random_range(-1.0..1.0), f64::from(i % 2 == 0)]).collect();
    let labels: Vec<usize> = rows.iter().map(|x| usize::from(x[1] == 1.0)).collect();
    let ds = TabularDataset::new(
        rows,
        vec![FeatureKind::Continuous, FeatureKind::Binary],
        labels,
        vec!["age".into(), "flag".into()],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let fad = FadConfig { folds: 3, methods: vec![Method::Ig, Method::ShapleyExact], ..FadConfig::default() };
    let a = run_fad_analysis(&ds, &small_train(), &fad).unwrap();
    // An absent indicator equals its zero baseline, so it receives nothing.
    for attr in a.attributions.iter().filter(|a| a.label == 0) {
        assert_eq!(attr.scores[1], 0.0, "{attr:?}");
    }
    assert!(a.attributions.iter().any(|a| a.label == 1 && a.scores[1] != 0.0));
}
