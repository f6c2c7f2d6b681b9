//! Attention/cost grids: representation, normalization, projection between the
//! camera image and the ground plane, serialization and jet rendering.

mod camera;
mod grid_format;
mod jet;

pub use camera::{CameraModel, GroundGrid, MapProjection, Pixel};
pub use grid_format::{
    decode_grid, encode_grid, load_grid, save_grid, AGRID_HEADER_LEN, AGRID_MAGIC,
};
pub use jet::{jet_rgb, render_jet, save_jet_png};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostmapError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("attention value {value} at index {index} is outside [0, 1]")]
    InvalidValue { index: usize, value: f64 },
    #[error("trajectory has no cells")]
    EmptyTrajectory,
    #[error("cell ({i}, {j}) out of bounds for a {height}x{width} map")]
    OutOfBounds {
        i: usize,
        j: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("grid format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image encoding failed: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, CostmapError>;

/// Which model (or source) produced a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapRole {
    Pretrained,
    Vlm,
    Distilled,
    Synthetic,
}

impl MapRole {
    pub fn code(self) -> u8 {
        match self {
            MapRole::Pretrained => 0,
            MapRole::Vlm => 1,
            MapRole::Distilled => 2,
            MapRole::Synthetic => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => MapRole::Pretrained,
            1 => MapRole::Vlm,
            2 => MapRole::Distilled,
            3 => MapRole::Synthetic,
            _ => return None,
        })
    }
}

/// Coordinate frame the grid lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFrame {
    Image,
    Ground,
}

impl MapFrame {
    pub fn code(self) -> u8 {
        match self {
            MapFrame::Image => 0,
            MapFrame::Ground => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => MapFrame::Image,
            1 => MapFrame::Ground,
            _ => return None,
        })
    }
}

/// Row/column address of a map cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CostmapIndex {
    pub i: usize,
    pub j: usize,
}

impl CostmapIndex {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// Row-major grid of attention values in `[0, 1]`.
///
/// Values are held as `f32`, the precision of the on-disk format, so a
/// save/load round trip is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    role: MapRole,
    frame: MapFrame,
}

impl AttentionMap {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f32>,
        role: MapRole,
        frame: MapFrame,
    ) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((index, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CostmapError::InvalidValue {
                index,
                value: v as f64,
            });
        }
        Ok(Self {
            width,
            height,
            values,
            role,
            frame,
        })
    }

    /// Builds a map from `f64` values, rounding to storage precision.
    pub fn from_f64(
        width: usize,
        height: usize,
        values: &[f64],
        role: MapRole,
        frame: MapFrame,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            values.iter().map(|&v| v as f32).collect(),
            role,
            frame,
        )
    }

    pub fn zeros(width: usize, height: usize, role: MapRole, frame: MapFrame) -> Result<Self> {
        Self::filled(width, height, 0.0, role, frame)
    }

    pub fn filled(
        width: usize,
        height: usize,
        value: f32,
        role: MapRole,
        frame: MapFrame,
    ) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], role, frame)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn role(&self) -> MapRole {
        self.role
    }

    pub fn frame(&self) -> MapFrame {
        self.frame
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_role(mut self, role: MapRole) -> Self {
        self.role = role;
        self
    }

    pub fn get(&self, index: CostmapIndex) -> Result<f32> {
        self.check_index(index)?;
        Ok(self.values[index.i * self.width + index.j])
    }

    pub fn check_index(&self, index: CostmapIndex) -> Result<()> {
        if index.i >= self.height || index.j >= self.width {
            return Err(CostmapError::OutOfBounds {
                i: index.i,
                j: index.j,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Block-averages the map down by an integer factor (ragged edges are
    /// averaged over the cells they contain).
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(CostmapError::Dimension(
                "downsample factor must be >= 1".into(),
            ));
        }
        let w = self.width.div_ceil(factor);
        let h = self.height.div_ceil(factor);
        let mut out = Vec::with_capacity(w * h);
        for bi in 0..h {
            for bj in 0..w {
                let mut sum = 0.0f64;
                let mut n = 0usize;
                for i in bi * factor..((bi + 1) * factor).min(self.height) {
                    for j in bj * factor..((bj + 1) * factor).min(self.width) {
                        sum += self.values[i * self.width + j] as f64;
                        n += 1;
                    }
                }
                out.push(((sum / n as f64) as f32).clamp(0.0, 1.0));
            }
        }
        Self::new(w, h, out, self.role, self.frame)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(CostmapError::Dimension(format!(
            "grid must be at least 1x1, got {height}x{width}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(CostmapError::Dimension(format!(
            "expected {} values for a {height}x{width} grid, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Min-max normalizes a raw grid into `[0, 1]`. Constant grids become all zeros.
pub fn normalize(
    width: usize,
    height: usize,
    raw: &[f64],
    role: MapRole,
    frame: MapFrame,
) -> Result<AttentionMap> {
    check_dims(width, height, raw.len())?;
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(CostmapError::InvalidValue { index, value });
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let values = if span > 0.0 {
        raw.iter()
            .map(|&v| (((v - lo) / span) as f32).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; raw.len()]
    };
    AttentionMap::new(width, height, values, role, frame)
}

/// Maximum map value over the given cells.
pub fn sample_max_along(map: &AttentionMap, cells: &[CostmapIndex]) -> Result<f64> {
    if cells.is_empty() {
        return Err(CostmapError::EmptyTrajectory);
    }
    let mut best = 0.0f32;
    for &c in cells {
        best = best.max(map.get(c)?);
    }
    Ok(best as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, v: Vec<f32>) -> AttentionMap {
        AttentionMap::new(w, h, v, MapRole::Synthetic, MapFrame::Image).unwrap()
    }

    #[test]
    fn normalize_min_max() {
        let m = normalize(
            2,
            2,
            &[0.0, 2.0, 4.0, 8.0],
            MapRole::Pretrained,
            MapFrame::Image,
        )
        .unwrap();
        assert_eq!(m.values(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let m = normalize(2, 2, &[5.0; 4], MapRole::Pretrained, MapFrame::Image).unwrap();
        assert_eq!(m.values(), &[0.0; 4]);
    }

    #[test]
    fn normalize_rejects_empty_and_mismatch() {
        assert!(matches!(
            normalize(0, 0, &[], MapRole::Vlm, MapFrame::Image),
            Err(CostmapError::Dimension(_))
        ));
        assert!(matches!(
            normalize(2, 2, &[1.0; 3], MapRole::Vlm, MapFrame::Image),
            Err(CostmapError::Dimension(_))
        ));
    }

    #[test]
    fn map_rejects_out_of_range() {
        let err = AttentionMap::new(2, 1, vec![0.5, 1.5], MapRole::Vlm, MapFrame::Image);
        assert!(matches!(
            err,
            Err(CostmapError::InvalidValue { index: 1, .. })
        ));
        let err = AttentionMap::new(1, 1, vec![f32::NAN], MapRole::Vlm, MapFrame::Image);
        assert!(err.is_err());
    }

    #[test]
    fn sample_max_examples() {
        let uniform = img(3, 3, vec![0.3; 9]);
        let cells = [CostmapIndex::new(0, 0), CostmapIndex::new(2, 1)];
        assert_eq!(sample_max_along(&uniform, &cells).unwrap(), 0.3f32 as f64);

        let mut v = vec![0.0; 9];
        v[4] = 0.9;
        let hot = img(3, 3, v);
        let path: Vec<_> = (0..3).map(|i| CostmapIndex::new(i, 1)).collect();
        assert_eq!(sample_max_along(&hot, &path).unwrap(), 0.9f32 as f64);

        assert!(matches!(
            sample_max_along(&hot, &[]),
            Err(CostmapError::EmptyTrajectory)
        ));
        assert!(matches!(
            sample_max_along(&hot, &[CostmapIndex::new(3, 0)]),
            Err(CostmapError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn downsample_averages_blocks() {
        let m = img(2, 2, vec![0.0, 0.5, 1.0, 0.5]);
        let d = m.downsample(2).unwrap();
        assert_eq!((d.width(), d.height()), (1, 1));
        assert_eq!(d.values(), &[0.5]);
    }

    proptest! {
        #[test]
        fn normalize_hits_both_ends(raw in prop::collection::vec(-100.0f64..100.0, 64)) {
            let m = normalize(8, 8, &raw, MapRole::Synthetic, MapFrame::Image).unwrap();
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mmin = m.values().iter().cloned().fold(f32::INFINITY, f32::min);
            let mmax = m.values().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            if hi > lo {
                prop_assert_eq!(mmin, 0.0);
                prop_assert_eq!(mmax, 1.0);
            } else {
                prop_assert_eq!(mmax, 0.0);
            }
        }

        #[test]
        fn normalize_is_idempotent(raw in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let n = raw.len();
            let once = normalize(n, 1, &raw, MapRole::Synthetic, MapFrame::Image).unwrap();
            let twice = normalize(n, 1, &once.values_f64(), MapRole::Synthetic, MapFrame::Image).unwrap();
            prop_assert_eq!(once.values(), twice.values());
        }

        #[test]
        fn sample_max_matches_scan_and_is_monotone(
            vals in prop::collection::vec(0.0f32..=1.0, 30),
            picks in prop::collection::vec((0usize..5, 0usize..6), 1..20),
            extra in (0usize..5, 0usize..6),
        ) {
            let m = img(6, 5, vals.clone());
            let cells: Vec<_> = picks.iter().map(|&(i, j)| CostmapIndex::new(i, j)).collect();
            let got = sample_max_along(&m, &cells).unwrap();
            let mut scan = f32::NEG_INFINITY;
            for c in &cells {
                scan = scan.max(vals[c.i * 6 + c.j]);
            }
            prop_assert_eq!(got, scan as f64);

            let mut rev = cells.clone();
            rev.reverse();
            prop_assert_eq!(sample_max_along(&m, &rev).unwrap(), got);

            let mut more = cells;
            more.push(CostmapIndex::new(extra.0, extra.1));
            prop_assert!(sample_max_along(&m, &more).unwrap() >= got);
        }
    }
}
