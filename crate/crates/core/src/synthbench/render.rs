//! Rasterization and photometric degradation.

use std::path::Path;

use rand::Rng;

use super::scene::Layout;
use crate::error::{Error, Result};
use crate::metrics::Raster;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    /// Interleaved RGB, row-major.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(path, &self.data, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn to_raster(&self) -> Raster {
        Raster::new(
            self.width as usize,
            self.height as usize,
            3,
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("buffer matches shape")
    }
}

/// Uniform value in [−1, 1) from integer coordinates; a splitmix64 finalizer.
pub(crate) fn hash_unit(seed: u64, a: u64, b: u64, c: u64) -> f64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ c.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

const TEXTURE_NOISE: f64 = 5.0;

/// Renders `layout` to linear float RGB, painting objects in order. Texture
/// noise is keyed by `texture_seed` and pixel position.
pub fn rasterize(layout: &Layout, texture_seed: u64) -> Vec<f64> {
    let (w, h) = (layout.width as usize, layout.height as usize);
    let mut out = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        for x in 0..w {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let mut color = layout.background;
            for o in &layout.objects {
                if !o.contains(p) {
                    continue;
                }
                let on_mark = o.marks.iter().any(|m| {
                    (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2) <= o.mark_radius * o.mark_radius
                });
                color = if on_mark {
                    o.mark_color
                } else {
                    let t = (p[0] - o.center[0]) * o.stripe_dir[0] + (p[1] - o.center[1]) * o.stripe_dir[1];
                    let band = (t / o.stripe_period).floor() as i64;
                    let shade = if band.rem_euclid(2) == 0 { 1.0 } else { 0.82 };
                    o.color.map(|c| c * shade)
                };
            }
            for (ch, c) in color.iter().enumerate() {
                out.push(c + TEXTURE_NOISE * hash_unit(texture_seed, x as u64, y as u64, ch as u64));
            }
        }
    }
    out
}

/// Photometric corruption at `level` ∈ [0, 1]: contrast loss, brightening, a
/// colour cast, and pixel noise, all growing linearly with `level`.
pub fn degrade_appearance(pixels: &mut [f64], level: f64, degradation_seed: u64) {
    if level == 0.0 {
        return;
    }
    let mut rng = rng_for(degradation_seed, "appearance");
    let tint: [f64; 3] = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let noise_seed: u64 = rng.gen();
    let contrast = 1.0 - 0.45 * level;
    let brightness = 35.0 * level;
    let noise = 30.0 * level;
    for (i, v) in pixels.iter_mut().enumerate() {
        let ch = i % 3;
        *v = (*v - 128.0) * contrast + 128.0 + brightness + 25.0 * level * tint[ch]
            + noise * hash_unit(noise_seed, i as u64, 0, 0);
    }
}

pub fn quantize(width: u32, height: u32, pixels: &[f64]) -> RgbImage {
    RgbImage {
        width,
        height,
        data: pixels.iter().map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8).collect(),
    }
}
