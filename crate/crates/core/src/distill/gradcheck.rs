use super::model::{AttentionModel, ImageSequence};
use super::Result;

/// Outcome of comparing analytic adapter gradients against central
/// finite differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
}

/// Central differences of the blended loss over every adapter entry.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_check(
    model: &AttentionModel,
    seq: &ImageSequence,
    a_pre: &[f64],
    a_vlm: &[f64],
    lambda: f64,
    eps: f64,
    h: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = model.loss_and_gradients(seq, a_pre, a_vlm, lambda, eps)?;
    let analytic = grads.flatten();
    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for block in 0..4 {
        let len = probe.adapter_params_mut()[block].len();
        for k in 0..len {
            let orig = probe.adapter_params_mut()[block][k];
            probe.adapter_params_mut()[block][k] = orig + h;
            let (plus, _) = probe.loss_and_gradients(seq, a_pre, a_vlm, lambda, eps)?;
            probe.adapter_params_mut()[block][k] = orig - h;
            let (minus, _) = probe.loss_and_gradients(seq, a_pre, a_vlm, lambda, eps)?;
            probe.adapter_params_mut()[block][k] = orig;
            numeric.push((plus - minus) / (2.0 * h));
        }
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max);
    Ok(GradCheckReport {
        analytic,
        numeric,
        max_rel_error,
    })
}
