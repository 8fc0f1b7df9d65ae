//! Model-free features for generated images: keypoints with descriptors that
//! follow scene identity, and a global embedding of photometric statistics.

use super::render::{hash_unit, RgbImage};
use super::scene::{FeatureKey, Layout};
use crate::datamodel::Keypoint;
use crate::metrics::raster::luma;

pub const SIGNATURE_DIM: usize = 24;
const PATCH_CELLS: usize = 3;
pub const DESCRIPTOR_DIM: usize = SIGNATURE_DIM + PATCH_CELLS * PATCH_CELLS;
pub const EMBEDDING_DIM: usize = 20;

const DESCRIPTOR_NOISE: f64 = 0.05;
const PATCH_WEIGHT: f64 = 0.15;

/// Identity part of a descriptor: the same for every rendering of the same
/// corner or mark of the same base layout.
fn signature(layout_seed: u64, key: FeatureKey) -> [f64; SIGNATURE_DIM] {
    let mut out = [0.0; SIGNATURE_DIM];
    for (d, v) in out.iter_mut().enumerate() {
        let tag = (key.1 as u64) << 32 | d as u64;
        // sum of three uniforms: a bell-shaped value with unit-ish spread
        *v = (0..3)
            .map(|k| hash_unit(layout_seed, key.0 as u64, tag, k))
            .sum::<f64>();
    }
    out
}

fn luma_at(img: &RgbImage, x: i64, y: i64) -> f64 {
    let xc = x.clamp(0, img.width as i64 - 1) as u32;
    let yc = y.clamp(0, img.height as i64 - 1) as u32;
    let [r, g, b] = img.pixel(xc, yc);
    luma(r, g, b)
}

/// Contrast-normalized 3×3 block means of the 9×9 luma patch around (x, y).
fn patch_stats(img: &RgbImage, x: f64, y: f64) -> [f64; PATCH_CELLS * PATCH_CELLS] {
    let (cx, cy) = (x.floor() as i64, y.floor() as i64);
    let mut cells = [0.0; PATCH_CELLS * PATCH_CELLS];
    for by in 0..3 {
        for bx in 0..3 {
            let mut s = 0.0;
            for dy in 0..3 {
                for dx in 0..3 {
                    s += luma_at(img, cx - 4 + 3 * bx + dx, cy - 4 + 3 * by + dy);
                }
            }
            cells[by as usize * 3 + bx as usize] = s / 9.0;
        }
    }
    let mean = cells.iter().sum::<f64>() / cells.len() as f64;
    let sd = (cells.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cells.len() as f64).sqrt();
    cells.map(|c| (c - mean) / (sd + 4.0))
}

/// Keypoints at every object corner and mark that lands inside the image.
///
/// Positions receive localization noise of up to `4·√3·geometry_level`
/// pixels. Descriptors combine the layout signature, small per-capture noise,
/// and local patch statistics of `img`.
pub fn keypoints(
    layout: &Layout,
    img: &RgbImage,
    layout_seed: u64,
    capture_seed: u64,
    geometry_level: f64,
    degradation_seed: u64,
) -> Vec<Keypoint> {
    let (w, h) = (layout.width as f64, layout.height as f64);
    let jitter = 4.0 * 3f64.sqrt() * geometry_level;
    let mut out = Vec::new();
    for (oi, o) in layout.objects.iter().enumerate() {
        for (key, p) in o.features(oi) {
            let k0 = key.0 as u64;
            let k1 = key.1 as u64;
            let x = p[0] + jitter * hash_unit(degradation_seed, k0, k1, 0);
            let y = p[1] + jitter * hash_unit(degradation_seed, k0, k1, 1);
            if !(1.0..w - 1.0).contains(&x) || !(1.0..h - 1.0).contains(&y) {
                continue;
            }
            let sig = signature(layout_seed, key);
            let patch = patch_stats(img, x, y);
            let mut descriptor = Vec::with_capacity(DESCRIPTOR_DIM);
            for (d, s) in sig.iter().enumerate() {
                let noise = DESCRIPTOR_NOISE * hash_unit(capture_seed, k0, k1, 100 + d as u64);
                descriptor.push((s + noise) as f32);
            }
            descriptor.extend(patch.iter().map(|v| (PATCH_WEIGHT * v) as f32));
            out.push(Keypoint { x, y, descriptor });
        }
    }
    out
}

/// Position-invariant photometric statistics: channel means and spreads, a
/// luma histogram, and gradient / Laplacian energy.
pub fn raw_embedding(img: &RgbImage) -> Vec<f64> {
    let (w, h) = (img.width as usize, img.height as usize);
    let n = (w * h) as f64;
    let mut mean = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut hist = [0.0; 8];
    let mut l = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let px = img.pixel(x as u32, y as u32);
            for c in 0..3 {
                let v = px[c] as f64;
                mean[c] += v;
                sq[c] += v * v;
            }
            let lv = luma(px[0], px[1], px[2]);
            hist[((lv / 32.0) as usize).min(7)] += 1.0;
            l[y * w + x] = lv;
        }
    }
    let mut out = Vec::with_capacity(EMBEDDING_DIM);
    out.extend(mean.iter().map(|m| m / n / 255.0));
    for c in 0..3 {
        let m = mean[c] / n;
        out.push((sq[c] / n - m * m).max(0.0).sqrt() / 128.0);
    }
    out.extend(hist.iter().map(|v| v / n));
    let mut grad_mean = 0.0;
    let mut grad_hist = [0.0; 4];
    let mut lap = 0.0;
    let inner = ((w - 2) * (h - 2)) as f64;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let at = |xx: usize, yy: usize| l[yy * w + xx];
            let gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            let g = (gx * gx + gy * gy).sqrt();
            grad_mean += g;
            grad_hist[match g {
                g if g < 4.0 => 0,
                g if g < 12.0 => 1,
                g if g < 30.0 => 2,
                _ => 3,
            }] += 1.0;
            lap += (at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * at(x, y)).abs();
        }
    }
    out.push(grad_mean / inner / 64.0);
    out.extend(grad_hist.iter().map(|v| v / inner));
    out.push(lap / inner / 64.0);
    debug_assert_eq!(out.len(), EMBEDDING_DIM);
    out
}
