use vilad_core::metrics::Point;

pub fn d(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Minimum over every monotone coupling of the maximum paired distance,
/// enumerated path by path.
pub fn brute_frechet(a: &[Point], b: &[Point]) -> f64 {
    fn walk(a: &[Point], b: &[Point], i: usize, j: usize, worst: f64, best: &mut f64) {
        let worst = worst.max(d(a[i], b[j]));
        if worst >= *best {
            return;
        }
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = worst;
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, worst, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, worst, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, worst, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}
