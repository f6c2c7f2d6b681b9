use serde::{Deserialize, Serialize};

use super::{AnnotateError, FrontierAnnotation, Result};
use crate::costmap::{AttentionMap, MapFrame, MapRole};
use crate::frame::ImageFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frontier {
    Left,
    Center,
    Right,
}

impl Frontier {
    pub const ALL: [Frontier; 3] = [Frontier::Left, Frontier::Center, Frontier::Right];

    /// Token used for this frontier in prompts.
    pub fn tag(self) -> &'static str {
        match self {
            Frontier::Left => "LEFT",
            Frontier::Center => "CENTER",
            Frontier::Right => "RIGHT",
        }
    }
}

/// Outline colors for left, center and right.
pub const FRONTIER_COLORS: [[u8; 3]; 3] = [[230, 40, 40], [40, 200, 60], [40, 90, 230]];

/// Half-open pixel (or cell) rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierBand {
    pub frontier: Frontier,
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl FrontierBand {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn contains_column(&self, x: usize) -> bool {
        (self.x0..self.x1).contains(&x)
    }
}

/// Three equal-width bands over the lower half; leftover columns widen the
/// leftmost bands first.
pub fn frontier_bands(width: usize, height: usize) -> Result<[FrontierBand; 3]> {
    if width < 3 || height < 2 {
        return Err(AnnotateError::Dimension(format!(
            "frontiers need at least 3x2, got {width}x{height}"
        )));
    }
    let (base, rem) = (width / 3, width % 3);
    let y0 = height / 2;
    let mut x0 = 0;
    Ok(Frontier::ALL.map(|frontier| {
        let i = frontier as usize;
        let w = base + usize::from(i < rem);
        let band = FrontierBand {
            frontier,
            x0,
            x1: x0 + w,
            y0,
            y1: height,
        };
        x0 += w;
        band
    }))
}

/// Copy of `frame` with each band outlined in its color.
pub fn mark_frontiers(frame: &ImageFrame) -> Result<(ImageFrame, [FrontierBand; 3])> {
    let bands = frontier_bands(frame.width as usize, frame.height as usize)?;
    let mut out = frame.clone();
    for (band, color) in bands.iter().zip(FRONTIER_COLORS) {
        for x in band.x0..band.x1 {
            out.set_pixel(x as u32, band.y0 as u32, color);
            out.set_pixel(x as u32, (band.y1 - 1) as u32, color);
        }
        for y in band.y0..band.y1 {
            out.set_pixel(band.x0 as u32, y as u32, color);
            out.set_pixel((band.x1 - 1) as u32, y as u32, color);
        }
    }
    Ok((out, bands))
}

/// Supervision map with each lower-half band filled by its likelihood.
pub fn likelihood_to_map(
    ann: &FrontierAnnotation,
    width: usize,
    height: usize,
) -> Result<AttentionMap> {
    ann.validate()?;
    let bands = frontier_bands(width, height)?;
    let mut values = vec![0.0f32; width * height];
    for band in &bands {
        let p = ann.get(band.frontier) as f32;
        for i in band.y0..band.y1 {
            values[i * width + band.x0..i * width + band.x1].fill(p);
        }
    }
    Ok(AttentionMap::new(
        width,
        height,
        values,
        MapRole::Vlm,
        MapFrame::Image,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirds_of_300_by_200() {
        let b = frontier_bands(300, 200).unwrap();
        assert_eq!(
            (b[0].x0, b[0].x1, b[1].x0, b[1].x1, b[2].x0, b[2].x1),
            (0, 100, 100, 200, 200, 300)
        );
        assert!(b.iter().all(|b| b.y0 == 100 && b.y1 == 200));
    }

    #[test]
    fn remainder_goes_left() {
        let w: Vec<usize> = frontier_bands(301, 200)
            .unwrap()
            .iter()
            .map(|b| b.x1 - b.x0)
            .collect();
        assert_eq!(w, [101, 100, 100]);
        let w: Vec<usize> = frontier_bands(302, 200)
            .unwrap()
            .iter()
            .map(|b| b.x1 - b.x0)
            .collect();
        assert_eq!(w, [101, 101, 100]);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(matches!(
            frontier_bands(2, 10),
            Err(AnnotateError::Dimension(_))
        ));
        assert!(matches!(
            frontier_bands(10, 1),
            Err(AnnotateError::Dimension(_))
        ));
    }

    #[test]
    fn single_frontier_map() {
        let m = likelihood_to_map(&FrontierAnnotation::new(1.0, 0.0, 0.0).unwrap(), 6, 4).unwrap();
        let expect = [
            0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0,
        ];
        assert_eq!(m.values(), expect.map(|v| v as f32));
        assert_eq!(m.role(), MapRole::Vlm);
    }

    #[test]
    fn out_of_range_likelihood_rejected() {
        let bad = FrontierAnnotation {
            p_left: 1.2,
            p_center: 0.0,
            p_right: 0.0,
            rationale: None,
        };
        assert!(matches!(
            likelihood_to_map(&bad, 6, 4),
            Err(AnnotateError::Validation(_))
        ));
    }
}
