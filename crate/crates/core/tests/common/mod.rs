#![allow(dead_code)]

use fad_core::nncore::{DenseLayer, DenseNetwork, GradientTarget, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// He-initialised network with random nonzero biases.
pub fn random_net(rng: &mut ChaCha8Rng, input: usize, hidden: Vec<usize>, classes: usize) -> DenseNetwork {
    let spec = NetworkSpec::new(input, hidden, classes);
    let net = DenseNetwork::initialize(&spec, rng.random()).unwrap();
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            let bias = uniform_vec(rng, l.out_dim, 0.5);
            DenseLayer::new(l.in_dim, l.out_dim, l.weights.clone(), bias).unwrap()
        })
        .collect();
    DenseNetwork::from_layers(layers, GradientTarget::Probability).unwrap()
}

/// Single linear layer: logits = W x + b.
pub fn linear_net(weights: Vec<Vec<f64>>, bias: Vec<f64>, target: GradientTarget) -> DenseNetwork {
    let out = weights.len();
    let input = weights[0].len();
    let flat = weights.into_iter().flatten().collect();
    DenseNetwork::from_layers(vec![DenseLayer::new(input, out, flat, bias).unwrap()], target).unwrap()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
