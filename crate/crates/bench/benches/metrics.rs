use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sadge_core::calibrate::{fit_fusion, FitPoint};
use sadge_core::datamodel::{CorrespondenceSet, CorrespondenceSource};
use sadge_core::fusion::FusionEquation;
use sadge_core::metrics::{psnr, ransac_inlier_count, ssim, RansacParams, Raster};

fn raster_pair(side: usize) -> (Raster, Raster) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = (0..side * side).map(|_| rng.gen_range(0..256) as f64).collect();
    let b: Vec<f64> = a.iter().map(|v| (v + rng.gen_range(-20.0..20.0)).clamp(0.0, 255.0)).collect();
    (
        Raster::new(side, side, 1, a).unwrap(),
        Raster::new(side, side, 1, b).unwrap(),
    )
}

/// Half the matches follow a pure translation, the rest are random.
fn matches(n: usize) -> CorrespondenceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = (0..n)
        .map(|i| {
            let (x, y) = (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
            if i % 2 == 0 {
                [x, y, x + 12.0, y + 3.0]
            } else {
                [x, y, rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)]
            }
        })
        .collect();
    CorrespondenceSet::new(m, CorrespondenceSource::MutualNn)
}

fn pixel_metrics(c: &mut Criterion) {
    let (a, b) = raster_pair(128);
    c.bench_function("psnr_128", |bench| bench.iter(|| psnr(black_box(&a), black_box(&b)).unwrap()));
    c.bench_function("ssim_128", |bench| bench.iter(|| ssim(black_box(&a), black_box(&b)).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let set = matches(60);
    c.bench_function("ransac_60_matches", |bench| {
        bench.iter(|| ransac_inlier_count(black_box(&set), &RansacParams::with_seed(3)))
    });
}

fn fitting(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points: Vec<FitPoint> = (0..15)
        .map(|_| {
            let (g, a): (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            FitPoint { g_hat: g, a_hat: a, y: 0.5 * g + 0.3 * a + g * a + rng.gen_range(-0.05..0.05) }
        })
        .collect();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("constrained_polynomial_30_starts", |bench| {
        bench.iter_batched(
            || points.clone(),
            |p| fit_fusion(FusionEquation::ConstrainedPolynomial, &p, 30, 5).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, pixel_metrics, geometry, fitting);
criterion_main!(benches);
