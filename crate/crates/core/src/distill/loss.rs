//! Attention consistency losses.

use super::{DistillConfig, DistillError, Result};
use crate::costmap::AttentionMap;

/// Cosine distance `1 - <a, b> / max(|a||b|, eps)` between flattened grids.
pub fn cosine_distance(a: &[f64], b: &[f64], eps: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt()).max(eps)
}

/// Gradient of [`cosine_distance`] with respect to `a`, accumulated into
/// `out` with weight `scale`.
pub fn cosine_distance_grad(a: &[f64], b: &[f64], eps: f64, scale: f64, out: &mut [f64]) {
    let (mut dot, mut na2, mut nb2) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    let (na, nb) = (na2.sqrt(), nb2.sqrt());
    let denom = na * nb;
    if denom > eps {
        // d/da [dot / (|a||b|)] = b / (|a||b|) - dot * a / (|a|^3 |b|)
        let k1 = 1.0 / denom;
        let k2 = dot / (na2 * denom);
        for ((g, x), y) in out.iter_mut().zip(a).zip(b) {
            *g -= scale * (k1 * y - k2 * x);
        }
    } else {
        for (g, y) in out.iter_mut().zip(b) {
            *g -= scale * y / eps;
        }
    }
}

fn check_same_shape(a: &AttentionMap, b: &AttentionMap) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(DistillError::Shape(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Cosine-distance attention loss in `[0, 2]` (`[0, 1]` for valid maps).
/// Two all-zero maps give 1 and log a warning.
pub fn loss_cosine(a: &AttentionMap, b: &AttentionMap, eps: f64) -> Result<f64> {
    check_same_shape(a, b)?;
    let (av, bv) = (a.values_f64(), b.values_f64());
    if av.iter().all(|&x| x == 0.0) && bv.iter().all(|&x| x == 0.0) {
        log::warn!("loss_cosine: both attention maps are all zero; returning 1");
    }
    Ok(cosine_distance(&av, &bv, eps))
}

/// Alias for [`loss_cosine`]. This is the cosine distance, not structural similarity.
pub use loss_cosine as loss_ssim;

/// `(1 - lambda) * L(pred, a_pre) + lambda * L(pred, a_vlm)` on raw values.
pub fn blended_loss(pred: &[f64], a_pre: &[f64], a_vlm: &[f64], lambda: f64, eps: f64) -> f64 {
    (1.0 - lambda) * cosine_distance(pred, a_pre, eps) + lambda * cosine_distance(pred, a_vlm, eps)
}

pub fn loss_total(
    pred: &AttentionMap,
    a_pre: &AttentionMap,
    a_vlm: &AttentionMap,
    cfg: &DistillConfig,
) -> Result<f64> {
    let l_pre = loss_cosine(pred, a_pre, cfg.epsilon)?;
    let l_vlm = loss_cosine(pred, a_vlm, cfg.epsilon)?;
    Ok((1.0 - cfg.lambda_vlm) * l_pre + cfg.lambda_vlm * l_vlm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{MapFrame, MapRole};

    fn m2(v: [f32; 4]) -> AttentionMap {
        AttentionMap::new(2, 2, v.to_vec(), MapRole::Vlm, MapFrame::Image).unwrap()
    }

    const EPS: f64 = 1e-8;

    #[test]
    fn self_distance_is_zero() {
        let a = m2([0.2, 0.4, 0.6, 0.8]);
        assert!(loss_cosine(&a, &a, EPS).unwrap().abs() < 1e-15);
    }

    #[test]
    fn orthogonal_is_one() {
        let a = m2([1.0, 0.0, 0.0, 0.0]);
        let b = m2([0.0, 0.0, 0.3, 0.0]);
        assert_eq!(loss_cosine(&a, &b, EPS).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_pair() {
        let a = m2([1.0, 0.0, 0.0, 0.0]);
        let b = m2([1.0, 1.0, 0.0, 0.0]);
        let expected = 1.0 - 1.0 / 2f64.sqrt();
        assert!((loss_cosine(&a, &b, EPS).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.29289).abs() < 1e-5);
    }

    #[test]
    fn both_zero_gives_one() {
        let z = m2([0.0; 4]);
        assert_eq!(loss_cosine(&z, &z, EPS).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = m2([0.0; 4]);
        let b = AttentionMap::zeros(4, 1, MapRole::Vlm, MapFrame::Image).unwrap();
        assert!(matches!(
            loss_cosine(&a, &b, EPS),
            Err(DistillError::Shape(_))
        ));
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let pred = m2([1.0, 0.0, 0.0, 0.0]);
        let pre = pred.clone();
        let vlm = m2([0.0, 1.0, 0.0, 0.0]);
        let cfg = |lambda_vlm| DistillConfig {
            lambda_vlm,
            ..Default::default()
        };
        assert_eq!(loss_total(&pred, &pre, &vlm, &cfg(0.0)).unwrap(), 0.0);
        assert_eq!(loss_total(&pred, &pre, &vlm, &cfg(1.0)).unwrap(), 1.0);
        assert_eq!(loss_total(&pred, &pre, &vlm, &cfg(0.5)).unwrap(), 0.5);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let a = [0.3, 0.1, 0.7, 0.2, 0.9];
        let b = [0.5, 0.5, 0.1, 0.0, 0.4];
        let mut g = [0.0; 5];
        cosine_distance_grad(&a, &b, EPS, 1.0, &mut g);
        for k in 0..5 {
            let h = 1e-6;
            let mut ap = a;
            let mut am = a;
            ap[k] += h;
            am[k] -= h;
            let fd = (cosine_distance(&ap, &b, EPS) - cosine_distance(&am, &b, EPS)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }
}
