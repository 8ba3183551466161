use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AttributionMeta, AttributionVector, BaselineVector, MethodTag};
use crate::error::{FadError, Result};
use crate::nncore::DenseNetwork;
use crate::numeric::ExactSum;

/// Largest input width for coalition enumeration (2^15 model evaluations).
pub const DEFAULT_EXACT_LIMIT: usize = 15;
/// Largest input width for enumerating every ordering (10! orderings).
pub const EXHAUSTIVE_LIMIT: usize = 10;
pub const DEFAULT_PERMUTATIONS: u64 = 200;

/// Value of a coalition: features present take `x`, the rest the baseline.
struct Game<'a> {
    net: &'a DenseNetwork,
    x: &'a [f64],
    baseline: &'a [f64],
    class: usize,
}

impl<'a> Game<'a> {
    fn new(net: &'a DenseNetwork, x: &'a [f64], baseline: &'a BaselineVector, class: usize) -> Result<Self> {
        let dim = net.input_dim();
        baseline.check_dim(dim)?;
        // Validates shape and class once; the unchecked paths below rely on it.
        net.score(x, class)?;
        Ok(Self { net, x, baseline: baseline.values(), class })
    }

    fn dim(&self) -> usize {
        self.x.len()
    }

    fn value(&self, composite: &[f64]) -> f64 {
        self.net.score_unchecked(composite, self.class)
    }

    fn empty(&self) -> Vec<f64> {
        self.baseline.to_vec()
    }

    /// Walks one ordering, handing each feature's marginal contribution to `sink`.
    fn walk(&self, order: &[usize], v_empty: f64, composite: &mut Vec<f64>, mut sink: impl FnMut(usize, f64)) {
        composite.clear();
        composite.extend_from_slice(self.baseline);
        let mut prev = v_empty;
        for &i in order {
            composite[i] = self.x[i];
            let cur = self.value(composite);
            sink(i, cur - prev);
            prev = cur;
        }
    }

    fn finish(&self, scores: Vec<f64>, method: MethodTag, meta: AttributionMeta) -> AttributionVector {
        let v_full = self.value(self.x);
        let v_empty = self.value(self.baseline);
        let score_delta = v_full - v_empty;
        let total: f64 = scores.iter().sum();
        AttributionVector {
            scores,
            target_class: self.class,
            method,
            meta: AttributionMeta {
                target: self.net.gradient_target(),
                completeness_gap: (total - score_delta).abs(),
                score_delta,
                ..meta
            },
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Exact Shapley values by enumerating all `2^d` coalitions:
///
/// ```text
/// phi_i = sum_{S not containing i} |S|! (d-|S|-1)! / d! * (v(S + i) - v(S))
/// ```
///
/// The weighted sum is accumulated exactly and divided by `d!` once.
pub fn shapley_exact(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
) -> Result<AttributionVector> {
    shapley_exact_limited(net, x, baseline, target_class, DEFAULT_EXACT_LIMIT)
}

pub fn shapley_exact_limited(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
    limit: usize,
) -> Result<AttributionVector> {
    let game = Game::new(net, x, baseline, target_class)?;
    let d = game.dim();
    if d > limit || d >= usize::BITS as usize - 1 {
        return Err(FadError::Config(format!(
            "{d} features exceed the exact Shapley limit of {limit}; use sampled Shapley instead"
        )));
    }
    let coalitions = 1usize << d;
    let mut composite = game.empty();
    let mut values = Vec::with_capacity(coalitions);
    for mask in 0..coalitions {
        for (j, c) in composite.iter_mut().enumerate() {
            *c = if mask >> j & 1 == 1 { x[j] } else { game.baseline[j] };
        }
        values.push(game.value(&composite));
    }

    let fact = factorials(d);
    let scores = (0..d)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = ExactSum::new();
            for mask in (0..coalitions).filter(|m| m & bit == 0) {
                let size = mask.count_ones() as usize;
                let weight = fact[size] * fact[d - size - 1];
                acc.add_product(weight, values[mask | bit] - values[mask]);
            }
            acc.value() / fact[d]
        })
        .collect();
    Ok(game.finish(scores, MethodTag::ShapleyExact, AttributionMeta::default()))
}

/// Monte Carlo Shapley values from `permutations` seeded random orderings.
///
/// Each ordering contributes one marginal contribution per feature; the
/// estimate is their mean and the per-feature standard error of that mean is
/// reported in the metadata.
pub fn shapley_sampled(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
    permutations: u64,
    seed: u64,
) -> Result<AttributionVector> {
    if permutations == 0 {
        return Err(FadError::Config("sampled Shapley needs at least one permutation".into()));
    }
    let game = Game::new(net, x, baseline, target_class)?;
    let d = game.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let v_empty = game.value(game.baseline);
    let mut sums = vec![ExactSum::new(); d];
    // Welford accumulators for the standard error.
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut composite = game.empty();
    for n in 1..=permutations {
        order.shuffle(&mut rng);
        game.walk(&order, v_empty, &mut composite, |i, delta| {
            sums[i].add(delta);
            let step = delta - mean[i];
            mean[i] += step / n as f64;
            m2[i] += step * (delta - mean[i]);
        });
    }
    let count = permutations as f64;
    let scores = sums.iter().map(|s| s.value() / count).collect();
    let standard_errors = m2
        .iter()
        .map(|m| if permutations > 1 { (m / (count - 1.0) / count).sqrt() } else { f64::NAN })
        .map(|se| if se.is_finite() { se } else { 0.0 })
        .collect();
    Ok(game.finish(
        scores,
        MethodTag::ShapleySampled,
        AttributionMeta {
            permutations: Some(permutations),
            seed: Some(seed),
            standard_errors: Some(standard_errors),
            ..AttributionMeta::default()
        },
    ))
}

/// Permutation estimator run over every one of the `d!` orderings.
///
/// Marginal contributions are summed exactly, so the result is bit-identical
/// to [`shapley_exact`] on the same inputs.
pub fn shapley_permutations_exhaustive(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
) -> Result<AttributionVector> {
    let game = Game::new(net, x, baseline, target_class)?;
    let d = game.dim();
    if d > EXHAUSTIVE_LIMIT {
        return Err(FadError::Config(format!(
            "{d} features exceed the exhaustive ordering limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let v_empty = game.value(game.baseline);
    let mut sums = vec![ExactSum::new(); d];
    let mut composite = game.empty();
    let mut count: u64 = 0;
    for_each_permutation(d, |order| {
        count += 1;
        game.walk(order, v_empty, &mut composite, |i, delta| sums[i].add(delta));
    });
    let total = factorials(d)[d];
    debug_assert_eq!(count as f64, total);
    let scores = sums.iter().map(|s| s.value() / total).collect();
    Ok(game.finish(
        scores,
        MethodTag::ShapleyExhaustive,
        AttributionMeta { permutations: Some(count), ..AttributionMeta::default() },
    ))
}

/// Heap's algorithm, iterative form.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut items: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    visit(&items);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(counters[i], i);
            }
            visit(&items);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Exact enumeration when the input is at most `exact_limit` wide, sampling
/// otherwise. The chosen mode is noted in `meta.auto_selected`.
pub fn shapley_auto(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
    exact_limit: usize,
    permutations: u64,
    seed: u64,
) -> Result<AttributionVector> {
    let d = net.input_dim();
    let mut attr = if d <= exact_limit {
        shapley_exact_limited(net, x, baseline, target_class, exact_limit)?
    } else {
        shapley_sampled(net, x, baseline, target_class, permutations, seed)?
    };
    let mode = if d <= exact_limit { "exact" } else { "sampled" };
    attr.meta.auto_selected = Some(format!("{mode}: {d} features, exact limit {exact_limit}"));
    Ok(attr)
}
