use std::path::Path;

use image::RgbImage;

use super::{AttentionMap, CostmapError, Result};

/// Classic jet colormap: dark blue at 0, through cyan, yellow, to dark red at 1.
/// Each channel is `clamp(1.5 - |4x - k|, 0, 1)` with k = 3, 2, 1 for r, g, b.
pub fn jet_rgb(value: f64) -> [u8; 3] {
    let x = value.clamp(0.0, 1.0);
    let ch = |k: f64| {
        let c = (1.5 - (4.0 * x - k).abs()).clamp(0.0, 1.0);
        (c * 255.0).round() as u8
    };
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// One pixel per cell.
pub fn render_jet(map: &AttentionMap) -> RgbImage {
    let mut img = RgbImage::new(map.width() as u32, map.height() as u32);
    for (k, &v) in map.values().iter().enumerate() {
        let (i, j) = (k / map.width(), k % map.width());
        img.put_pixel(j as u32, i as u32, image::Rgb(jet_rgb(v as f64)));
    }
    img
}

/// Renders and writes a PNG, upscaling each cell to `scale x scale` pixels.
pub fn save_jet_png(map: &AttentionMap, scale: u32, path: impl AsRef<Path>) -> Result<()> {
    let base = render_jet(map);
    let img = if scale > 1 {
        image::imageops::resize(
            &base,
            base.width() * scale,
            base.height() * scale,
            image::imageops::FilterType::Nearest,
        )
    } else {
        base
    };
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CostmapError::Image(e.to_string()))
}
