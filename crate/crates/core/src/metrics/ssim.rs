//! Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
//! K1 = 0.01, K2 = 0.03, L = 255, averaged over all fully-covered window positions.

use crate::error::{Error, Result};
use crate::metrics::raster::Raster;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

pub fn c1() -> f64 {
    (K1 * L) * (K1 * L)
}

pub fn c2() -> f64 {
    (K2 * L) * (K2 * L)
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let r = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - r;
        *t = (-(x * x) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

pub fn ssim(a: &Raster, b: &Raster) -> Result<f64> {
    a.same_shape(b)?;
    if a.width < WINDOW || a.height < WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs images of at least {WINDOW}x{WINDOW}, got {}x{}",
            a.width, a.height
        )));
    }
    let mut total = 0.0;
    for c in 0..a.channels {
        total += ssim_plane(&a.plane(c), &b.plane(c), a.width, a.height);
    }
    Ok(total / a.channels as f64)
}

fn ssim_plane(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let taps = gaussian_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, w, h, &taps);
    let mu_y = filter_valid(y, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);

    let (c1, c2) = (c1(), c2());
    let n = mu_x.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        sum += num / den;
    }
    sum / n as f64
}

/// Separable correlation keeping only positions where the window fits.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for yy in 0..h {
        let line = &src[yy * w..(yy + 1) * w];
        for xx in 0..ow {
            let mut acc = 0.0;
            for k in 0..WINDOW {
                acc += taps[k] * line[xx + k];
            }
            rows[yy * ow + xx] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for yy in 0..oh {
        for xx in 0..ow {
            let mut acc = 0.0;
            for k in 0..WINDOW {
                acc += taps[k] * rows[(yy + k) * ow + xx];
            }
            out[yy * ow + xx] = acc;
        }
    }
    out
}
