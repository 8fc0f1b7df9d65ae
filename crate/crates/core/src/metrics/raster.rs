use std::path::Path;

use crate::datamodel::ChannelMode;
use crate::error::{Error, Result};

/// Planar-interleaved 8-bit-range image stored as f64 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "raster {width}x{height}x{channels} needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_gray_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(width, height, 1, pixels.iter().map(|&p| p as f64).collect())
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Raster {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    /// Decodes an image file to 8 bits per channel. `Luma` reduces RGB with
    /// ITU-R BT.601 weights.
    pub fn load(path: &Path, mode: ChannelMode) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let data = match mode {
            ChannelMode::Luma => rgb
                .pixels()
                .map(|p| luma(p.0[0], p.0[1], p.0[2]))
                .collect(),
            ChannelMode::Rgb => rgb.as_raw().iter().map(|&v| v as f64).collect(),
        };
        let channels = match mode {
            ChannelMode::Luma => 1,
            ChannelMode::Rgb => 3,
        };
        Raster::new(w, h, channels, data)
    }

    /// Samples of channel `c` in row-major order.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub(crate) fn same_shape(&self, other: &Raster) -> Result<()> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(())
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}
