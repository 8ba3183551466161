use super::network::{DenseNetwork, Gradients};
use super::train::TrainConfig;
use crate::error::{FadError, Result};

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &DenseNetwork) -> Self {
        Self { first: Gradients::zeros_like(net), second: Gradients::zeros_like(net), step: 0 }
    }
}

/// One bias-corrected Adam update, applied in place.
pub fn adam_step(net: &mut DenseNetwork, state: &mut AdamState, grads: &Gradients, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if !grads.matches(net) || !state.first.matches(net) || !state.second.matches(net) {
        return Err(FadError::Shape("gradient or moment shapes do not match the network".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.epsilon;

    let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for (k, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[k];
        let m = &mut state.first.layers[k];
        let v = &mut state.second.layers[k];
        update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{DenseLayer, GradientTarget};

    fn scalar_net(w: f64) -> DenseNetwork {
        DenseNetwork::from_layers(vec![DenseLayer::new(1, 1, vec![w], vec![0.0]).unwrap()], GradientTarget::Logit)
            .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients { layers: vec![crate::nncore::LayerGradients { weights: vec![g], bias: vec![0.0] }] }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.7);
        let mut state = AdamState::new(&net);
        state.first.layers[0].weights[0] = 0.5;
        state.second.layers[0].weights[0] = 0.25;
        let before = net.clone();
        adam_step(&mut net, &mut state, &scalar_grad(0.0), &TrainConfig::default()).unwrap();
        // m and v decay but the step is not zero when history exists; start fresh instead.
        assert_eq!(state.first.layers[0].weights[0], 0.45);
        assert!((state.second.layers[0].weights[0] - 0.25 * 0.999).abs() < 1e-15);
        let mut fresh = before.clone();
        let mut fresh_state = AdamState::new(&fresh);
        adam_step(&mut fresh, &mut fresh_state, &scalar_grad(0.0), &TrainConfig::default()).unwrap();
        assert_eq!(fresh, before);
        assert_eq!(fresh_state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &mut state, &scalar_grad(1.0), &TrainConfig::default()).unwrap();
        // m_hat = v_hat = 1, update = 1e-3 / (1 + 1e-8)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((net.layers()[0].weights[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn second_identical_step_uses_accumulated_moments() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        adam_step(&mut net, &mut state, &scalar_grad(1.0), &cfg).unwrap();
        let after_first = net.layers()[0].weights[0];
        adam_step(&mut net, &mut state, &scalar_grad(1.0), &cfg).unwrap();
        assert_eq!(state.step, 2);
        // m = 0.19, v = 0.001999; corrections 0.19 and 0.001999 give m_hat = v_hat = 1 again.
        let m: f64 = 0.9 * (1.0 - 0.9) + (1.0 - 0.9);
        let v: f64 = 0.999 * (1.0 - 0.999) + (1.0 - 0.999);
        let m_hat = m / (1.0 - 0.9f64.powi(2));
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expected_delta = 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        let second_delta = after_first - net.layers()[0].weights[0];
        assert!((second_delta - expected_delta).abs() < 1e-15);
        assert_eq!(state.first.layers[0].weights[0], m);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net);
        let bad = Gradients { layers: vec![] };
        assert!(matches!(
            adam_step(&mut net, &mut state, &bad, &TrainConfig::default()),
            Err(FadError::Shape(_))
        ));
    }
}
