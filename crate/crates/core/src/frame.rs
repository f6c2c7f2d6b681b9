//! RGB camera frames.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("image codec error: {0}")]
    Codec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, 3 bytes per pixel.
    #[serde(skip)]
    pub rgb: Vec<u8>,
    pub timestamp: f64,
    pub sequence_id: u64,
}

impl ImageFrame {
    pub fn new(
        width: u32,
        height: u32,
        rgb: Vec<u8>,
        timestamp: f64,
        sequence_id: u64,
    ) -> Result<Self, FrameError> {
        if rgb.len() != 3 * width as usize * height as usize {
            return Err(FrameError::Dimension(format!(
                "buffer of {} bytes does not match {width}x{height} RGB",
                rgb.len()
            )));
        }
        Ok(Self {
            width,
            height,
            rgb,
            timestamp,
            sequence_id,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let rgb = color
            .iter()
            .copied()
            .cycle()
            .take(3 * width as usize * height as usize)
            .collect();
        Self {
            width,
            height,
            rgb,
            timestamp: 0.0,
            sequence_id: 0,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let k = 3 * (y as usize * self.width as usize + x as usize);
        [self.rgb[k], self.rgb[k + 1], self.rgb[k + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let k = 3 * (y as usize * self.width as usize + x as usize);
        self.rgb[k..k + 3].copy_from_slice(&c);
    }

    /// Luma in `[0, 1]`, row-major.
    pub fn to_gray(&self) -> Vec<f64> {
        self.rgb
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
            .collect()
    }

    /// Luma box-averaged down to `out_w x out_h`; each output pixel averages
    /// the source pixels whose centres fall inside it.
    pub fn gray_resized(&self, out_w: usize, out_h: usize) -> Vec<f64> {
        let gray = self.to_gray();
        let (w, h) = (self.width as usize, self.height as usize);
        let mut sums = vec![0.0; out_w * out_h];
        let mut counts = vec![0usize; out_w * out_h];
        for y in 0..h {
            let oy = ((y as f64 + 0.5) * out_h as f64 / h as f64) as usize;
            for x in 0..w {
                let ox = ((x as f64 + 0.5) * out_w as f64 / w as f64) as usize;
                let k = oy.min(out_h - 1) * out_w + ox.min(out_w - 1);
                sums[k] += gray[y * w + x];
                counts[k] += 1;
            }
        }
        sums.iter()
            .zip(&counts)
            .enumerate()
            .map(|(k, (&s, &c))| {
                if c > 0 {
                    s / c as f64
                } else {
                    // upsampling: nearest source pixel
                    let (oy, ox) = (k / out_w, k % out_w);
                    let sy = ((oy as f64 + 0.5) * h as f64 / out_h as f64) as usize;
                    let sx = ((ox as f64 + 0.5) * w as f64 / out_w as f64) as usize;
                    gray[sy.min(h - 1) * w + sx.min(w - 1)]
                }
            })
            .collect()
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.rgb.clone())
            .expect("buffer length checked")
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, FrameError> {
        let mut buf = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut buf, ImageFormat::Png)
            .map_err(|e| FrameError::Codec(e.to_string()))?;
        Ok(buf.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), FrameError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    pub fn load_png(
        path: impl AsRef<Path>,
        timestamp: f64,
        sequence_id: u64,
    ) -> Result<Self, FrameError> {
        let img = image::open(path)
            .map_err(|e| FrameError::Codec(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw(), timestamp, sequence_id)
    }
}
