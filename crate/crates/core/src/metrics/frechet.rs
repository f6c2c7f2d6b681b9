use super::{MetricsError, Result};

pub type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Discrete Fréchet distance by the standard coupling-table recurrence.
pub fn frechet(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::Domain(
            "polylines need at least 2 points".into(),
        ));
    }
    if a.iter()
        .chain(b)
        .any(|p| !p.0.is_finite() || !p.1.is_finite())
    {
        return Err(MetricsError::Domain(
            "polyline has non-finite coordinates".into(),
        ));
    }
    let m = b.len();
    let mut prev = vec![0.0_f64; m];
    let mut cur = vec![0.0_f64; m];
    for (i, &pa) in a.iter().enumerate() {
        for (j, &pb) in b.iter().enumerate() {
            let d = dist(pa, pb);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Points at fixed arc-length spacing from the first point, plus the final
/// point. Always returns at least two points.
pub fn resample(points: &[Point], spacing: f64) -> Result<Vec<Point>> {
    if points.is_empty() {
        return Err(MetricsError::Domain(
            "cannot resample an empty polyline".into(),
        ));
    }
    if !(spacing > 0.0) {
        return Err(MetricsError::Domain("spacing must be positive".into()));
    }
    let mut out = vec![points[0]];
    let mut next = spacing;
    let mut walked = 0.0;
    for w in points.windows(2) {
        let len = dist(w[0], w[1]);
        while len > 0.0 && next <= walked + len {
            let f = (next - walked) / len;
            out.push((
                w[0].0 + f * (w[1].0 - w[0].0),
                w[0].1 + f * (w[1].1 - w[0].1),
            ));
            next += spacing;
        }
        walked += len;
    }
    let last = points[points.len() - 1];
    if out.len() < 2 || dist(*out.last().unwrap(), last) > 1e-12 {
        out.push(last);
    }
    Ok(out)
}

pub const RESAMPLE_SPACING_M: f64 = 0.1;

/// Fréchet distance between two trajectories after resampling both to
/// [`RESAMPLE_SPACING_M`].
pub fn trajectory_frechet(a: &[Point], b: &[Point]) -> Result<f64> {
    frechet(
        &resample(a, RESAMPLE_SPACING_M)?,
        &resample(b, RESAMPLE_SPACING_M)?,
    )
}
