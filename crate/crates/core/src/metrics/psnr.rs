use crate::error::Result;
use crate::metrics::raster::Raster;

/// Value reported for identical images, and the upper bound for every result.
pub const PSNR_CAP_DB: f64 = 100.0;

const PEAK: f64 = 255.0;

/// Peak signal-to-noise ratio in dB over all samples of both rasters.
pub fn psnr(a: &Raster, b: &Raster) -> Result<f64> {
    a.same_shape(b)?;
    let n = a.data.len() as f64;
    let sse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    let mse = sse / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_capped() {
        let a = Raster::constant(4, 4, 17.0);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn black_vs_white_is_zero_db() {
        let a = Raster::constant(8, 8, 0.0);
        let b = Raster::constant(8, 8, 255.0);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = Raster::constant(8, 8, 0.0);
        let b = Raster::constant(8, 9, 0.0);
        assert!(psnr(&a, &b).is_err());
    }
}
