//! Boolean occupancy grid in the world frame, used for rollout collision
//! filtering. Rasterization is conservative: any overlap marks a cell.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

/// Distance from a point to an axis-aligned rectangle (0 inside).
pub fn point_rect_distance(px: f64, py: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let dx = (x0 - px).max(0.0).max(px - x1);
    let dy = (y0 - py).max(0.0).max(py - y1);
    dx.hypot(dy)
}

/// Distance from a point to segment `ab`.
pub fn point_segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (px - (a.0 + t * dx)).hypot(py - (a.1 + t * dy))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Distance between segment `ab` and an axis-aligned rectangle.
pub fn segment_rect_distance(
    a: (f64, f64),
    b: (f64, f64),
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
) -> f64 {
    let inside = |p: (f64, f64)| p.0 >= x0 && p.0 <= x1 && p.1 >= y0 && p.1 <= y1;
    if inside(a) || inside(b) {
        return 0.0;
    }
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    for k in 0..4 {
        if segments_intersect(a, b, corners[k], corners[(k + 1) % 4]) {
            return 0.0;
        }
    }
    let mut d = point_rect_distance(a.0, a.1, x0, y0, x1, y1)
        .min(point_rect_distance(b.0, b.1, x0, y0, x1, y1));
    for c in corners {
        d = d.min(point_segment_distance(c.0, c.1, a, b));
    }
    d
}

impl OccupancyGrid {
    pub fn new(origin_x: f64, origin_y: f64, width: usize, height: usize, resolution: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            resolution,
            origin_x,
            origin_y,
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    /// Grid covering `[min_x, max_x] x [min_y, max_y]`.
    pub fn covering(min_x: f64, min_y: f64, max_x: f64, max_y: f64, resolution: f64) -> Self {
        let w = ((max_x - min_x) / resolution).ceil().max(1.0) as usize;
        let h = ((max_y - min_y) / resolution).ceil().max(1.0) as usize;
        Self::new(min_x, min_y, w, h, resolution)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_occupied(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, occupied: bool) {
        self.cells[row * self.width + col] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// World-space bounds `(x0, y0, x1, y1)` of a cell.
    pub fn cell_rect(&self, col: usize, row: usize) -> (f64, f64, f64, f64) {
        let x0 = self.origin_x + col as f64 * self.resolution;
        let y0 = self.origin_y + row as f64 * self.resolution;
        (x0, y0, x0 + self.resolution, y0 + self.resolution)
    }

    /// Iterates occupied cells as `(col, row)`.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(k, _)| (k % self.width, k / self.width))
    }

    /// Inclusive column/row range of cells touched by a world-space box,
    /// clipped to the grid. `None` if the box misses the grid.
    fn cell_range(
        &self,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    ) -> Option<(usize, usize, usize, usize)> {
        let c0 = ((x0 - self.origin_x) / self.resolution).floor();
        let r0 = ((y0 - self.origin_y) / self.resolution).floor();
        let c1 = ((x1 - self.origin_x) / self.resolution).floor();
        let r1 = ((y1 - self.origin_y) / self.resolution).floor();
        if c1 < 0.0 || r1 < 0.0 || c0 >= self.width as f64 || r0 >= self.height as f64 {
            return None;
        }
        Some((
            c0.max(0.0) as usize,
            r0.max(0.0) as usize,
            (c1 as usize).min(self.width - 1),
            (r1 as usize).min(self.height - 1),
        ))
    }

    pub fn fill_box(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        if let Some((c0, r0, c1, r1)) = self.cell_range(x0, y0, x1, y1) {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let (cx0, cy0, cx1, cy1) = self.cell_rect(c, r);
                    if cx0 <= x1 && cx1 >= x0 && cy0 <= y1 && cy1 >= y0 {
                        self.set(c, r, true);
                    }
                }
            }
        }
    }

    pub fn fill_disc(&mut self, cx: f64, cy: f64, radius: f64) {
        if let Some((c0, r0, c1, r1)) =
            self.cell_range(cx - radius, cy - radius, cx + radius, cy + radius)
        {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let (x0, y0, x1, y1) = self.cell_rect(c, r);
                    if point_rect_distance(cx, cy, x0, y0, x1, y1) <= radius {
                        self.set(c, r, true);
                    }
                }
            }
        }
    }

    /// Marks cells within `half_width` of segment `ab`.
    pub fn fill_segment(&mut self, a: (f64, f64), b: (f64, f64), half_width: f64) {
        let (x0, x1) = (a.0.min(b.0) - half_width, a.0.max(b.0) + half_width);
        let (y0, y1) = (a.1.min(b.1) - half_width, a.1.max(b.1) + half_width);
        if let Some((c0, r0, c1, r1)) = self.cell_range(x0, y0, x1, y1) {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let (rx0, ry0, rx1, ry1) = self.cell_rect(c, r);
                    if segment_rect_distance(a, b, rx0, ry0, rx1, ry1) <= half_width {
                        self.set(c, r, true);
                    }
                }
            }
        }
    }

    pub fn disc_leaves_grid(&self, cx: f64, cy: f64, radius: f64) -> bool {
        cx - radius < self.origin_x
            || cy - radius < self.origin_y
            || cx + radius > self.origin_x + self.width as f64 * self.resolution
            || cy + radius > self.origin_y + self.height as f64 * self.resolution
    }

    /// True when a disc overlaps an occupied cell or extends past the grid.
    /// Touching (distance exactly `radius`) counts as free.
    pub fn disc_collides(&self, cx: f64, cy: f64, radius: f64) -> bool {
        if self.disc_leaves_grid(cx, cy, radius) {
            return true;
        }
        let Some((c0, r0, c1, r1)) =
            self.cell_range(cx - radius, cy - radius, cx + radius, cy + radius)
        else {
            return false;
        };
        for r in r0..=r1 {
            let row = &self.cells[r * self.width..(r + 1) * self.width];
            for c in c0..=c1 {
                if row[c] {
                    let (x0, y0, x1, y1) = self.cell_rect(c, r);
                    if point_rect_distance(cx, cy, x0, y0, x1, y1) < radius {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Same predicate as [`disc_collides`](Self::disc_collides) by scanning
    /// every occupied cell. Test oracle.
    pub fn disc_collides_naive(&self, cx: f64, cy: f64, radius: f64) -> bool {
        self.disc_leaves_grid(cx, cy, radius)
            || self.occupied_cells().any(|(c, r)| {
                let (x0, y0, x1, y1) = self.cell_rect(c, r);
                point_rect_distance(cx, cy, x0, y0, x1, y1) < radius
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_rasterization_is_conservative() {
        let mut g = OccupancyGrid::new(0.0, 0.0, 10, 10, 1.0);
        g.fill_box(2.5, 2.5, 3.2, 3.2);
        let occ: Vec<_> = g.occupied_cells().collect();
        assert_eq!(occ, vec![(2, 2), (3, 2), (2, 3), (3, 3)]);
    }

    #[test]
    fn segment_rasterization() {
        let mut g = OccupancyGrid::new(0.0, 0.0, 10, 10, 1.0);
        g.fill_segment((0.5, 5.5), (9.5, 5.5), 0.05);
        assert_eq!(g.occupied_count(), 10);
        assert!((0..10).all(|c| g.is_occupied(c, 5)));
    }

    #[test]
    fn disc_collision() {
        let mut g = OccupancyGrid::new(0.0, 0.0, 20, 20, 0.5);
        g.fill_box(5.0, 0.0, 5.5, 10.0);
        assert!(!g.disc_collides(4.0, 5.0, 0.5));
        assert!(g.disc_collides(4.6, 5.0, 0.5));
        // leaving the grid counts as collision
        assert!(g.disc_collides(0.2, 5.0, 0.5));
    }

    #[test]
    fn segment_rect_distance_cases() {
        assert_eq!(
            segment_rect_distance((-1.0, 0.5), (2.0, 0.5), 0.0, 0.0, 1.0, 1.0),
            0.0
        );
        let d = segment_rect_distance((2.0, -1.0), (2.0, 2.0), 0.0, 0.0, 1.0, 1.0);
        assert!((d - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fast_and_naive_collision_agree(
            boxes in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.1f64..2.0, 0.1f64..2.0), 0..5),
            cx in 0.0f64..10.0, cy in 0.0f64..10.0, r in 0.05f64..1.0,
        ) {
            let mut g = OccupancyGrid::new(0.0, 0.0, 40, 40, 0.25);
            for (x, y, w, h) in boxes {
                g.fill_box(x, y, x + w, y + h);
            }
            prop_assert_eq!(g.disc_collides(cx, cy, r), g.disc_collides_naive(cx, cy, r));
        }
    }
}
