use serde::{Deserialize, Serialize};

use super::{CostmapError, CostmapIndex, Result};

/// Continuous pixel coordinates; pixel `(c, r)` covers `[c, c+1) x [r, r+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

/// Pinhole camera mounted above the robot origin looking forward, pitched
/// down, with zero roll and yaw. Ground points use the robot frame
/// (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_px: f64,
    pub principal_u: f64,
    pub principal_v: f64,
    pub height_m: f64,
    pub pitch_rad: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_px: 40.0,
            principal_u: 64.0,
            principal_v: 48.0,
            height_m: 0.8,
            pitch_rad: 0.7,
            image_width: 128,
            image_height: 96,
        }
    }
}

const MIN_DEPTH: f64 = 1e-9;

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CostmapError::Camera(m.to_string()));
        if !(self.focal_px > 0.0) {
            return bad("focal length must be positive");
        }
        if !(self.height_m > 0.0) {
            return bad("camera height must be positive");
        }
        if !(self.pitch_rad > 0.0 && self.pitch_rad < std::f64::consts::FRAC_PI_2) {
            return bad("pitch must lie in (0, pi/2)");
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be non-zero");
        }
        Ok(())
    }

    /// Forward distance at which the optical axis meets the ground.
    pub fn axis_ground_distance(&self) -> f64 {
        self.height_m / self.pitch_rad.tan()
    }

    /// Camera-frame coordinates (right, down, forward) of a ground point.
    fn to_camera(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (s, c) = self.pitch_rad.sin_cos();
        let right = -y;
        let down = -x * s + self.height_m * c;
        let depth = x * c + self.height_m * s;
        (right, down, depth)
    }

    /// Projects a ground point regardless of image bounds; `None` when the
    /// point is not in front of the camera.
    pub fn project_ground_unclipped(&self, x: f64, y: f64) -> Option<Pixel> {
        let (r, d, z) = self.to_camera(x, y);
        if z <= MIN_DEPTH {
            return None;
        }
        Some(Pixel {
            u: self.principal_u + self.focal_px * r / z,
            v: self.principal_v + self.focal_px * d / z,
        })
    }

    /// Projects a ground point into the image; `None` means out of view.
    pub fn project_ground_to_image(&self, x: f64, y: f64) -> Option<Pixel> {
        self.project_ground_unclipped(x, y)
            .filter(|p| self.contains(*p))
    }

    /// Projects a point at height `z` above the ground.
    pub fn project_point(&self, x: f64, y: f64, z: f64) -> Option<Pixel> {
        let (s, c) = self.pitch_rad.sin_cos();
        let dz = z - self.height_m;
        let right = -y;
        let down = -x * s - dz * c;
        let depth = x * c - dz * s;
        if depth <= MIN_DEPTH {
            return None;
        }
        Some(Pixel {
            u: self.principal_u + self.focal_px * right / depth,
            v: self.principal_v + self.focal_px * down / depth,
        })
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < self.image_width as f64 && p.v < self.image_height as f64
    }

    /// Intersects the viewing ray through a pixel with the ground plane.
    /// `None` for pixels at or above the horizon.
    pub fn unproject_to_ground(&self, p: Pixel) -> Option<(f64, f64)> {
        let xn = (p.u - self.principal_u) / self.focal_px;
        let yn = (p.v - self.principal_v) / self.focal_px;
        let (s, c) = self.pitch_rad.sin_cos();
        let descent = s + yn * c;
        if descent <= MIN_DEPTH {
            return None;
        }
        let t = self.height_m / descent;
        Some((t * (c - yn * s), -t * xn))
    }

    /// Map cell containing a pixel, for a map covering the full image.
    pub fn pixel_to_cell(
        &self,
        p: Pixel,
        map_width: usize,
        map_height: usize,
    ) -> Option<CostmapIndex> {
        if !self.contains(p) {
            return None;
        }
        let j = (p.u * map_width as f64 / self.image_width as f64).floor() as usize;
        let i = (p.v * map_height as f64 / self.image_height as f64).floor() as usize;
        Some(CostmapIndex::new(
            i.min(map_height - 1),
            j.min(map_width - 1),
        ))
    }

    /// Centre pixel of a map cell.
    pub fn cell_center(&self, cell: CostmapIndex, map_width: usize, map_height: usize) -> Pixel {
        Pixel {
            u: (cell.j as f64 + 0.5) * self.image_width as f64 / map_width as f64,
            v: (cell.i as f64 + 0.5) * self.image_height as f64 / map_height as f64,
        }
    }
}

/// Robot-centric metric grid for `Ground`-frame maps. Row 0 is the far edge,
/// column 0 the leftmost edge, matching the image orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundGrid {
    pub resolution: f64,
    /// Forward coordinate of the far edge of row 0.
    pub x_far: f64,
    /// Lateral coordinate of the left edge of column 0.
    pub y_left: f64,
}

impl GroundGrid {
    pub fn cell_of(
        &self,
        x: f64,
        y: f64,
        map_width: usize,
        map_height: usize,
    ) -> Option<CostmapIndex> {
        let fi = (self.x_far - x) / self.resolution;
        let fj = (self.y_left - y) / self.resolution;
        if !(fi >= 0.0 && fj >= 0.0) {
            return None;
        }
        let (i, j) = (fi.floor() as usize, fj.floor() as usize);
        (i < map_height && j < map_width).then_some(CostmapIndex::new(i, j))
    }

    pub fn cell_center(&self, cell: CostmapIndex) -> (f64, f64) {
        (
            self.x_far - (cell.i as f64 + 0.5) * self.resolution,
            self.y_left - (cell.j as f64 + 0.5) * self.resolution,
        )
    }
}

/// How robot-frame ground points are looked up in a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MapProjection {
    Image(CameraModel),
    Ground(GroundGrid),
}

impl MapProjection {
    /// Cell under a robot-frame ground point; `None` when out of view.
    pub fn cell_of(
        &self,
        x: f64,
        y: f64,
        map_width: usize,
        map_height: usize,
    ) -> Option<CostmapIndex> {
        match self {
            MapProjection::Image(cam) => cam
                .project_ground_to_image(x, y)
                .and_then(|p| cam.pixel_to_cell(p, map_width, map_height)),
            MapProjection::Ground(g) => g.cell_of(x, y, map_width, map_height),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> CameraModel {
        CameraModel::default()
    }

    /// Ground-plane homography H = K [r1 r2 t] built from the explicit
    /// world-to-camera rotation.
    fn homography(cam: &CameraModel) -> [[f64; 3]; 3] {
        let (s, c) = cam.pitch_rad.sin_cos();
        // rows: camera right, down, forward axes expressed in world coords
        let rot = [[0.0, -1.0, 0.0], [-s, 0.0, -c], [c, 0.0, -s]];
        let centre = [0.0, 0.0, cam.height_m];
        let mut t = [0.0; 3];
        for r in 0..3 {
            t[r] = -(0..3).map(|k| rot[r][k] * centre[k]).sum::<f64>();
        }
        let k = [
            [cam.focal_px, 0.0, cam.principal_u],
            [0.0, cam.focal_px, cam.principal_v],
            [0.0, 0.0, 1.0],
        ];
        let m = [
            [rot[0][0], rot[0][1], t[0]],
            [rot[1][0], rot[1][1], t[1]],
            [rot[2][0], rot[2][1], t[2]],
        ];
        let mut h = [[0.0; 3]; 3];
        for r in 0..3 {
            for col in 0..3 {
                h[r][col] = (0..3).map(|q| k[r][q] * m[q][col]).sum();
            }
        }
        h
    }

    #[test]
    fn axis_point_maps_to_principal_point() {
        let c = cam();
        let p = c
            .project_ground_to_image(c.axis_ground_distance(), 0.0)
            .unwrap();
        assert!((p.u - c.principal_u).abs() < 1e-9);
        assert!((p.v - c.principal_v).abs() < 1e-9);
    }

    #[test]
    fn left_points_map_left_of_centre() {
        let c = cam();
        let p = c.project_ground_to_image(2.0, 0.5).unwrap();
        assert!(p.u < c.principal_u);
        let p = c.project_ground_to_image(2.0, -0.5).unwrap();
        assert!(p.u > c.principal_u);
    }

    #[test]
    fn behind_camera_is_out_of_view() {
        let c = cam();
        assert!(c.project_ground_to_image(-3.0, 0.0).is_none());
        assert!(c.project_ground_to_image(1.0, 50.0).is_none());
    }

    #[test]
    fn matches_homography_oracle() {
        let c = cam();
        let h = homography(&c);
        let mut checked = 0;
        for k in 0..20 {
            let x = 0.6 + 0.4 * k as f64;
            let y = -1.5 + 0.15 * k as f64;
            let w = h[2][0] * x + h[2][1] * y + h[2][2];
            let u = (h[0][0] * x + h[0][1] * y + h[0][2]) / w;
            let v = (h[1][0] * x + h[1][1] * y + h[1][2]) / w;
            let p = c.project_ground_unclipped(x, y).unwrap();
            assert!(
                (p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6,
                "{k}: {p:?} vs {u},{v}"
            );
            checked += 1;
        }
        assert_eq!(checked, 20);
    }

    #[test]
    fn raised_point_at_zero_height_matches_ground() {
        let c = cam();
        let a = c.project_point(3.0, 0.7, 0.0).unwrap();
        let b = c.project_ground_unclipped(3.0, 0.7).unwrap();
        assert!((a.u - b.u).abs() < 1e-12 && (a.v - b.v).abs() < 1e-12);
    }

    #[test]
    fn ground_grid_lookup() {
        let g = GroundGrid {
            resolution: 0.5,
            x_far: 4.0,
            y_left: 2.0,
        };
        assert_eq!(g.cell_of(3.9, 1.9, 8, 8), Some(CostmapIndex::new(0, 0)));
        assert_eq!(g.cell_of(0.1, -1.9, 8, 8), Some(CostmapIndex::new(7, 7)));
        assert_eq!(g.cell_of(4.1, 0.0, 8, 8), None);
        assert_eq!(g.cell_of(-0.1, 0.0, 8, 8), None);
        let (x, y) = g.cell_center(CostmapIndex::new(7, 7));
        assert_eq!(g.cell_of(x, y, 8, 8), Some(CostmapIndex::new(7, 7)));
    }

    proptest! {
        #[test]
        fn projection_round_trip(x in 0.2f64..30.0, y in -20.0f64..20.0) {
            let c = cam();
            if let Some(p) = c.project_ground_to_image(x, y) {
                let (gx, gy) = c.unproject_to_ground(p).unwrap();
                prop_assert!((gx - x).abs() < 1e-6 && (gy - y).abs() < 1e-6);
            }
        }
    }
}
