use super::{AttributionMeta, AttributionVector, BaselineVector, MethodTag};
use crate::error::{FadError, Result};
use crate::nncore::DenseNetwork;

pub const DEFAULT_IG_STEPS: usize = 64;

/// Integrated gradients by the midpoint Riemann sum along the straight path
/// from `baseline` to `x`:
///
/// ```text
/// score_i = (x_i - b_i) / steps * sum_{k=1..steps} dF/dx_i (b + (k - 1/2)/steps * (x - b))
/// ```
///
/// The completeness gap against `F(x) - F(b)` is recorded in the metadata.
pub fn integrated_gradients(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target_class: usize,
    steps: usize,
) -> Result<AttributionVector> {
    if steps == 0 {
        return Err(FadError::Config("integrated gradients needs at least one step".into()));
    }
    let dim = net.input_dim();
    baseline.check_dim(dim)?;
    let f_x = net.score(x, target_class)?;
    let b = baseline.values();
    let f_b = net.score_unchecked(b, target_class);

    let diff: Vec<f64> = x.iter().zip(b).map(|(xi, bi)| xi - bi).collect();
    let mut scores = vec![0.0; dim];
    if diff.iter().any(|d| *d != 0.0) {
        let mut grad_sum = vec![0.0; dim];
        let mut point = vec![0.0; dim];
        for k in 0..steps {
            let alpha = (k as f64 + 0.5) / steps as f64;
            for ((p, bi), di) in point.iter_mut().zip(b).zip(&diff) {
                *p = bi + alpha * di;
            }
            let g = net.input_gradient_unchecked(&point, target_class);
            for (s, gi) in grad_sum.iter_mut().zip(&g) {
                *s += gi;
            }
        }
        for ((s, gs), di) in scores.iter_mut().zip(&grad_sum).zip(&diff) {
            *s = di * (gs / steps as f64);
        }
    }

    let score_delta = f_x - f_b;
    let total: f64 = scores.iter().sum();
    Ok(AttributionVector {
        scores,
        target_class,
        method: MethodTag::IntegratedGradients,
        meta: AttributionMeta {
            target: net.gradient_target(),
            steps: Some(steps),
            completeness_gap: (total - score_delta).abs(),
            score_delta,
            ..AttributionMeta::default()
        },
    })
}
