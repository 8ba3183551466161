mod common;

use common::{linear_net, random_net, rng, uniform_vec};
use fad_core::attribution::{
    importance_ranking, integrated_gradients, make_baseline, shapley_auto, shapley_exact, shapley_exact_limited,
    shapley_permutations_exhaustive, shapley_sampled, BaselineVector, FeatureKind, MethodTag,
};
use fad_core::nncore::{DenseLayer, DenseNetwork, GradientTarget};
use fad_core::FadError;
use proptest::prelude::*;
use rand::Rng;

/// Shapley values by averaging marginal contributions over every ordering,
/// written independently of the library's enumeration.
fn brute_force_shapley(net: &DenseNetwork, x: &[f64], b: &[f64], class: usize) -> Vec<f64> {
    let d = x.len();
    let mut phi = vec![0.0; d];
    let mut count = 0usize;
    let mut perm: Vec<usize> = (0..d).collect();
    fn visit(k: usize, perm: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            visit(k + 1, perm, f);
            perm.swap(k, i);
        }
    }
    visit(0, &mut perm, &mut |order: &[usize]| {
        let mut z = b.to_vec();
        let mut prev = net.score(&z, class).unwrap();
        for &i in order {
            z[i] = x[i];
            let cur = net.score(&z, class).unwrap();
            phi[i] += cur - prev;
            prev = cur;
        }
        count += 1;
    });
    phi.iter().map(|p| p / count as f64).collect()
}

#[test]
fn exact_matches_brute_force_orderings() {
    let mut r = rng(1);
    for trial in 0..30 {
        let d = 1 + trial % 6;
        let net = random_net(&mut r, d, vec![6, 4], 3);
        let x = uniform_vec(&mut r, d, 2.0);
        let b = uniform_vec(&mut r, d, 0.5);
        let class = trial % 3;
        let exact = shapley_exact(&net, &x, &BaselineVector::custom(b.clone()).unwrap(), class).unwrap();
        assert_eq!(exact.method, MethodTag::ShapleyExact);
        let oracle = brute_force_shapley(&net, &x, &b, class);
        for (a, o) in exact.scores.iter().zip(&oracle) {
            assert!((a - o).abs() <= 1e-12, "trial {trial}: {a} vs {o}");
        }
    }
}

#[test]
fn exhaustive_orderings_equal_exact_bit_for_bit() {
    let mut r = rng(2);
    for d in 1..=7 {
        let net = random_net(&mut r, d, vec![5], 2);
        let x = uniform_vec(&mut r, d, 1.5);
        let b = BaselineVector::custom(uniform_vec(&mut r, d, 0.3)).unwrap();
        let exact = shapley_exact(&net, &x, &b, 1).unwrap();
        let exhaustive = shapley_permutations_exhaustive(&net, &x, &b, 1).unwrap();
        assert_eq!(exact.scores, exhaustive.scores, "d = {d}");
    }
}

#[test]
fn symmetric_pair_splits_the_gain_evenly() {
    // Two features feeding the hidden layer through identical columns: the
    // network analogue of F = x1 * x2 at x = (1, 1), baseline (0, 0).
    let hidden = DenseLayer::new(2, 3, vec![0.7, 0.7, -1.2, -1.2, 0.4, 0.4], vec![0.1, -0.3, 0.2]).unwrap();
    let out = DenseLayer::new(3, 2, vec![1.0, -0.5, 0.8, -0.2, 0.9, 0.3], vec![0.0, 0.1]).unwrap();
    let net = DenseNetwork::from_layers(vec![hidden, out], GradientTarget::Probability).unwrap();
    let b = BaselineVector::zeros(2);
    let phi = shapley_exact(&net, &[1.0, 1.0], &b, 0).unwrap();
    let gain = net.score(&[1.0, 1.0], 0).unwrap() - net.score(&[0.0, 0.0], 0).unwrap();
    assert!((phi.scores[0] - phi.scores[1]).abs() <= 1e-15);
    assert!((phi.scores[0] - gain / 2.0).abs() <= 1e-15);
}

#[test]
fn additive_model_gets_weight_times_offset() {
    let w = vec![2.0, -1.0, 0.5, 3.0];
    let net = linear_net(vec![w.clone(), vec![0.0; 4]], vec![0.0, 0.0], GradientTarget::Logit);
    let x = [1.0, 2.0, -1.0, 0.25];
    let b = [0.5, -1.0, 1.0, 0.0];
    let base = BaselineVector::custom(b.to_vec()).unwrap();
    let phi = shapley_exact(&net, &x, &base, 0).unwrap();
    let ig = integrated_gradients(&net, &x, &base, 0, 1).unwrap();
    for j in 0..4 {
        let expected = w[j] * (x[j] - b[j]);
        assert!((phi.scores[j] - expected).abs() <= 1e-12);
        assert!((ig.scores[j] - expected).abs() <= 1e-12);
    }
}

#[test]
fn ig_completeness_improves_with_steps() {
    let mut r = rng(3);
    for _ in 0..40 {
        let d = r.random_range(2..8);
        let net = random_net(&mut r, d, vec![16, 8], 3);
        let x = uniform_vec(&mut r, d, 2.0);
        let b = BaselineVector::custom(uniform_vec(&mut r, d, 0.5)).unwrap();
        let gaps: Vec<f64> = [8, 64, 512]
            .iter()
            .map(|&s| integrated_gradients(&net, &x, &b, 0, s).unwrap().meta.completeness_gap)
            .collect();
        let delta = integrated_gradients(&net, &x, &b, 0, 512).unwrap().meta.score_delta;
        assert!(gaps[2] <= 1e-3 * delta.abs() + 1e-6);
        assert!(gaps[2] <= gaps[1] + 1e-9 && gaps[1] <= gaps[0] + 1e-9, "{gaps:?}");
    }
}

#[test]
fn ig_records_metadata() {
    let mut r = rng(4);
    let net = random_net(&mut r, 3, vec![4], 2);
    let ig = integrated_gradients(&net, &[1.0, 0.0, -1.0], &BaselineVector::zeros(3), 1, 64).unwrap();
    assert_eq!(ig.method, MethodTag::IntegratedGradients);
    assert_eq!(ig.meta.steps, Some(64));
    assert_eq!(ig.meta.target, GradientTarget::Probability);
    assert_eq!(ig.target_class, 1);
}

#[test]
fn dummy_feature_gets_nothing() {
    let mut r = rng(5);
    let net = random_net(&mut r, 4, vec![6], 3);
    let mut layers = net.layers().to_vec();
    for row in 0..layers[0].out_dim {
        layers[0].weights[row * 4 + 2] = 0.0;
    }
    let net = DenseNetwork::from_layers(layers, GradientTarget::Probability).unwrap();
    let x = [0.3, -1.0, 5.0, 0.8];
    let b = BaselineVector::zeros(4);
    assert_eq!(shapley_exact(&net, &x, &b, 0).unwrap().scores[2], 0.0);
    assert_eq!(integrated_gradients(&net, &x, &b, 0, 32).unwrap().scores[2], 0.0);
}

#[test]
fn sampled_converges_to_exact() {
    let mut r = rng(6);
    for d in [3, 6, 9] {
        let net = random_net(&mut r, d, vec![8], 2);
        let x = uniform_vec(&mut r, d, 2.0);
        let b = BaselineVector::zeros(d);
        let exact = shapley_exact(&net, &x, &b, 0).unwrap();
        let sampled = shapley_sampled(&net, &x, &b, 0, 5000, 9).unwrap();
        let scale = exact.scores.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-9;
        for (s, e) in sampled.scores.iter().zip(&exact.scores) {
            assert!((s - e).abs() <= 0.1 * scale, "d = {d}: {s} vs {e}");
        }
        let se = sampled.meta.standard_errors.as_ref().unwrap();
        assert_eq!(se.len(), d);
        assert!(se.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn auto_switches_to_sampling_above_limit() {
    let mut r = rng(7);
    let net = random_net(&mut r, 6, vec![4], 2);
    let x = uniform_vec(&mut r, 6, 1.0);
    let b = BaselineVector::zeros(6);
    let small = shapley_auto(&net, &x, &b, 0, 6, 50, 1).unwrap();
    let large = shapley_auto(&net, &x, &b, 0, 5, 50, 1).unwrap();
    assert_eq!(small.method, MethodTag::ShapleyExact);
    assert_eq!(large.method, MethodTag::ShapleySampled);
    assert!(small.meta.auto_selected.is_some() && large.meta.auto_selected.is_some());
    let err = shapley_exact_limited(&net, &x, &b, 0, 5).unwrap_err();
    assert!(matches!(err, FadError::Config(ref m) if m.contains("sampled")));
}

#[test]
fn baseline_from_training_rows() {
    let rows = vec![vec![1.0, 1.0], vec![2.0, 0.0], vec![3.0, 1.0]];
    let b = make_baseline(&rows, &[FeatureKind::Continuous, FeatureKind::Binary]).unwrap();
    assert_eq!(b.values(), &[2.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_method_is_zero_at_the_baseline(seed in any::<u64>(), d in 1usize..7) {
        let mut r = rng(seed);
        let net = random_net(&mut r, d, vec![5], 3);
        let x = uniform_vec(&mut r, d, 1.0);
        let b = BaselineVector::custom(x.clone()).unwrap();
        prop_assert!(integrated_gradients(&net, &x, &b, 0, 16).unwrap().scores.iter().all(|&v| v == 0.0));
        prop_assert!(shapley_exact(&net, &x, &b, 1).unwrap().scores.iter().all(|&v| v == 0.0));
        prop_assert!(shapley_sampled(&net, &x, &b, 2, 20, seed).unwrap().scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_efficiency(seed in any::<u64>(), d in 1usize..9) {
        let mut r = rng(seed);
        let net = random_net(&mut r, d, vec![6, 6], 2);
        let x = uniform_vec(&mut r, d, 2.0);
        let b = BaselineVector::custom(uniform_vec(&mut r, d, 1.0)).unwrap();
        let phi = shapley_exact(&net, &x, &b, 0).unwrap();
        let gain = net.score(&x, 0).unwrap() - net.score(b.values(), 0).unwrap();
        prop_assert!((phi.scores.iter().sum::<f64>() - gain).abs() <= 1e-9);
    }

    #[test]
    fn sampled_is_deterministic_per_seed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_net(&mut r, 5, vec![4], 2);
        let x = uniform_vec(&mut r, 5, 1.0);
        let b = BaselineVector::zeros(5);
        let a = shapley_sampled(&net, &x, &b, 0, 30, seed).unwrap();
        let c = shapley_sampled(&net, &x, &b, 0, 30, seed).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn ranking_is_a_magnitude_sorted_permutation(scores in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let attr = fad_core::attribution::AttributionVector {
            scores: scores.clone(),
            target_class: 0,
            method: MethodTag::IntegratedGradients,
            meta: Default::default(),
        };
        let ranking = importance_ranking(&attr);
        let mut seen = ranking.order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..scores.len()).collect::<Vec<_>>());
        for w in ranking.order.windows(2) {
            let (a, b) = (scores[w[0]].abs(), scores[w[1]].abs());
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
        let shares = attr.shares();
        if scores.iter().any(|&s| s != 0.0) {
            prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
