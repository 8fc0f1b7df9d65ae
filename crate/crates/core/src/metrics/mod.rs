//! Similarity primitives computed without pretrained models.

pub mod cosine;
pub mod matching;
pub mod psnr;
pub mod ransac;
pub mod raster;
pub mod ssim;

pub use cosine::{cosine_similarity, cosine_similarity_f32};
pub use matching::{mutual_nn_matches, mutual_nn_pairs};
pub use psnr::{psnr, PSNR_CAP_DB};
pub use ransac::{ransac_inlier_count, GeometryScore, RansacParams};
pub use raster::Raster;
pub use ssim::ssim;
