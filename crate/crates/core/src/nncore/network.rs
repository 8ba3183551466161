use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gelu::{gelu_derivative, gelu_unchecked};
use crate::error::{FadError, Result};

pub const NETWORK_FORMAT: &str = "fad-dense-network";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Input instance with finite features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FadError::Shape("feature vector must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FadError::Domain(format!("feature {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Which scalar output attribution gradients are taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientTarget {
    /// Softmax probability of the target class.
    #[default]
    Probability,
    /// Pre-softmax logit of the target class.
    Logit,
}

impl std::fmt::Display for GradientTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradientTarget::Probability => "probability",
            GradientTarget::Logit => "logit",
        })
    }
}

/// Fully connected layer; `weights` is row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let layer = Self { in_dim, out_dim, weights, bias };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(FadError::Shape("layer dimensions must be positive".into()));
        }
        if self.weights.len() != self.in_dim * self.out_dim {
            return Err(FadError::Shape(format!(
                "weights hold {} values, expected {}x{}",
                self.weights.len(),
                self.out_dim,
                self.in_dim
            )));
        }
        if self.bias.len() != self.out_dim {
            return Err(FadError::Shape(format!(
                "bias holds {} values, expected {}",
                self.bias.len(),
                self.out_dim
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(FadError::Domain("layer parameters must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn affine_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Architecture of a network: input width, hidden widths, class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub class_count: usize,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, class_count: usize) -> Self {
        Self { input_dim, hidden, class_count }
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden);
        dims.push(self.class_count);
        dims
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.class_count == 0 || self.hidden.contains(&0) {
            return Err(FadError::Config(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }
}

/// Feedforward classifier: GELU hidden layers, linear logits, softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    gradient_target: GradientTarget,
}

/// Per-layer parameter gradients (same shapes as the layers).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub(crate) fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    pub(crate) fn matches(&self, net: &DenseNetwork) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

/// Input gradient together with the output it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub values: Vec<f64>,
    pub target_class: usize,
    pub target: GradientTarget,
}

/// Activations recorded on the forward pass.
struct Trace {
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl DenseNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>, gradient_target: GradientTarget) -> Result<Self> {
        if layers.is_empty() {
            return Err(FadError::Shape("network needs at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(FadError::Shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_dim,
                    k + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers, gradient_target })
    }

    /// He-scaled uniform initialisation with zero biases.
    pub fn initialize(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = spec.dims();
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                DenseLayer { in_dim: fan_in, out_dim: fan_out, weights, bias: vec![0.0; fan_out] }
            })
            .collect();
        Ok(Self { layers, gradient_target: GradientTarget::default() })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.dims().windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        Ok(Self { layers, gradient_target: GradientTarget::default() })
    }

    pub fn with_gradient_target(mut self, target: GradientTarget) -> Self {
        self.gradient_target = target;
        self
    }

    pub fn gradient_target(&self) -> GradientTarget {
        self.gradient_target
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn class_count(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            input_dim: self.input_dim(),
            hidden: self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect(),
            class_count: self.class_count(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(FadError::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.class_count() {
            return Err(FadError::Index(format!(
                "class {class} out of range for {} classes",
                self.class_count()
            )));
        }
        Ok(())
    }

    /// Logits without shape checks.
    pub(crate) fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&current, &mut next);
            if k < last {
                next.iter_mut().for_each(|z| *z = gelu_unchecked(*z));
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.logits_unchecked(x))
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        argmax(&self.logits_unchecked(x))
    }

    /// Scalar explained by attributions: target probability or logit,
    /// following [`DenseNetwork::gradient_target`].
    pub fn score(&self, x: &[f64], class: usize) -> Result<f64> {
        self.check_input(x)?;
        self.check_class(class)?;
        Ok(self.score_unchecked(x, class))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64], class: usize) -> f64 {
        let logits = self.logits_unchecked(x);
        match self.gradient_target {
            GradientTarget::Logit => logits[class],
            GradientTarget::Probability => softmax(&logits)[class],
        }
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine_into(&current, &mut z);
            inputs.push(current);
            if k < last {
                current = z.iter().map(|v| gelu_unchecked(*v)).collect();
                pre.push(z);
            } else {
                current = z;
            }
        }
        Trace { inputs, pre, logits: current }
    }

    /// Backpropagates `d_logits`; accumulates parameter gradients into
    /// `params` when given and returns the gradient with respect to the input.
    fn backward(&self, trace: &Trace, d_logits: Vec<f64>, mut params: Option<&mut Gradients>) -> Vec<f64> {
        let mut delta = d_logits;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k + 1 < self.layers.len() {
                for (d, z) in delta.iter_mut().zip(&trace.pre[k]) {
                    *d *= gelu_derivative(*z);
                }
            }
            let input = &trace.inputs[k];
            if let Some(g) = params.as_deref_mut() {
                let lg = &mut g.layers[k];
                for (o, d) in delta.iter().enumerate() {
                    lg.bias[o] += d;
                    let row = &mut lg.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, x) in row.iter_mut().zip(input) {
                        *w += d * x;
                    }
                }
            }
            let mut prev = vec![0.0; layer.in_dim];
            for (row, d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            delta = prev;
        }
        delta
    }

    fn output_seed(&self, logits: &[f64], class: usize) -> Vec<f64> {
        match self.gradient_target {
            GradientTarget::Logit => {
                let mut seed = vec![0.0; logits.len()];
                seed[class] = 1.0;
                seed
            }
            GradientTarget::Probability => {
                // d p_t / d z_j = p_t (delta_tj - p_j)
                let p = softmax(logits);
                let pt = p[class];
                p.iter()
                    .enumerate()
                    .map(|(j, pj)| if j == class { pt * (1.0 - pj) } else { -pt * pj })
                    .collect()
            }
        }
    }

    /// Gradient of the target-class score with respect to each input feature.
    pub fn input_gradient(&self, x: &[f64], target_class: usize) -> Result<InputGradient> {
        self.check_input(x)?;
        self.check_class(target_class)?;
        Ok(InputGradient {
            values: self.input_gradient_unchecked(x, target_class),
            target_class,
            target: self.gradient_target,
        })
    }

    pub(crate) fn input_gradient_unchecked(&self, x: &[f64], class: usize) -> Vec<f64> {
        let trace = self.trace(x);
        let seed = self.output_seed(&trace.logits, class);
        self.backward(&trace, seed, None)
    }

    /// Cross-entropy loss of one labelled instance, accumulating its
    /// parameter gradient into `grads`.
    pub fn accumulate_loss_gradient(&self, x: &[f64], label: usize, grads: &mut Gradients) -> Result<f64> {
        self.check_input(x)?;
        self.check_class(label)?;
        if !grads.matches(self) {
            return Err(FadError::Shape("gradient buffers do not match network".into()));
        }
        let trace = self.trace(x);
        let mut d = softmax(&trace.logits);
        let loss = nll(d[label]);
        d[label] -= 1.0;
        self.backward(&trace, d, Some(grads));
        Ok(loss)
    }

    /// Mean cross-entropy over a labelled set.
    pub fn mean_loss(&self, xs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if xs.is_empty() || xs.len() != labels.len() {
            return Err(FadError::Shape("loss needs equal, non-empty rows and labels".into()));
        }
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            self.check_input(x)?;
            self.check_class(y)?;
            let p = softmax(&self.logits_unchecked(x));
            total += nll(p[y]);
        }
        Ok(total / xs.len() as f64)
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            format: NETWORK_FORMAT.to_string(),
            version: NETWORK_FORMAT_VERSION,
            input_dim: self.input_dim(),
            class_count: self.class_count(),
            layer_dims: std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.out_dim)).collect(),
            hidden_activation: "gelu".to_string(),
            output_activation: "softmax".to_string(),
            gradient_target: self.gradient_target,
            layers: self.layers.clone(),
        }
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        if doc.format != NETWORK_FORMAT {
            return Err(FadError::Config(format!("unknown network format '{}'", doc.format)));
        }
        if doc.version != NETWORK_FORMAT_VERSION {
            return Err(FadError::Config(format!("unsupported network format version {}", doc.version)));
        }
        if doc.hidden_activation != "gelu" || doc.output_activation != "softmax" {
            return Err(FadError::Config(format!(
                "unsupported activations {}/{}",
                doc.hidden_activation, doc.output_activation
            )));
        }
        let net = Self::from_layers(doc.layers, doc.gradient_target)?;
        let dims: Vec<usize> =
            std::iter::once(net.input_dim()).chain(net.layers.iter().map(|l| l.out_dim)).collect();
        if dims != doc.layer_dims || net.input_dim() != doc.input_dim || net.class_count() != doc.class_count {
            return Err(FadError::Shape("declared layer dims disagree with layer contents".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Versioned JSON form of a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub class_count: usize,
    pub layer_dims: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub gradient_target: GradientTarget,
    pub layers: Vec<DenseLayer>,
}

/// `-ln p`, floored at the smallest normal so a saturated softmax stays
/// finite. NaN passes through so divergence is still detected.
fn nll(p: f64) -> f64 {
    if p.is_nan() {
        f64::NAN
    } else {
        -p.max(f64::MIN_POSITIVE).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(weights: Vec<f64>, bias: Vec<f64>, in_dim: usize) -> DenseNetwork {
        let out = bias.len();
        DenseNetwork::from_layers(vec![DenseLayer::new(in_dim, out, weights, bias).unwrap()], GradientTarget::Logit)
            .unwrap()
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = DenseNetwork::zeros(&NetworkSpec::new(4, vec![5, 3], 4)).unwrap();
        let p = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_softmax_quarter_three_quarters() {
        // logits (0, ln 3) from a single linear layer with bias only.
        let net = linear(vec![0.0, 0.0], vec![0.0, 3f64.ln()], 1);
        let p = net.forward(&[7.0]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let net = DenseNetwork::zeros(&NetworkSpec::new(3, vec![], 2)).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(FadError::Shape(_))));
    }

    #[test]
    fn linear_logit_gradient_is_weight_row() {
        let w = vec![1.0, 0.0, 0.5, 0.0, 1.0, -2.0];
        let net = linear(w.clone(), vec![0.1, 0.2], 3);
        let g = net.input_gradient(&[0.3, -1.0, 2.0], 1).unwrap();
        assert_eq!(g.values, w[3..6].to_vec());
        assert_eq!(g.target, GradientTarget::Logit);
    }

    #[test]
    fn constant_network_has_zero_gradient() {
        let net = DenseNetwork::zeros(&NetworkSpec::new(3, vec![4], 2)).unwrap();
        let g = net.input_gradient(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_class_is_index_error() {
        let net = DenseNetwork::zeros(&NetworkSpec::new(2, vec![], 2)).unwrap();
        assert!(matches!(net.input_gradient(&[0.0, 0.0], 2), Err(FadError::Index(_))));
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = DenseLayer::zeros(2, 3);
        let b = DenseLayer::zeros(4, 2);
        assert!(matches!(
            DenseNetwork::from_layers(vec![a, b], GradientTarget::Probability),
            Err(FadError::Shape(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = DenseNetwork::initialize(&NetworkSpec::new(5, vec![7, 3], 3), 11)
            .unwrap()
            .with_gradient_target(GradientTarget::Logit);
        let back = DenseNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn parameter_count_of_reference_shape() {
        let spec = NetworkSpec::new(549, vec![256, 128, 64], 7);
        // 549*256+256 + 256*128+128 + 128*64+64 + 64*7+7
        assert_eq!(spec.parameter_count(), 140_800 + 32_896 + 8_256 + 455);
    }
}
