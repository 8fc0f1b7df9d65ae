//! Domain types, configuration and feature-manifest loading, and the pair-score cache.

pub mod cache;
pub mod config;
pub mod manifest;
pub mod table;
pub mod types;

pub use cache::PairScoreCache;
pub use config::{
    BenchmarkConfig, ChannelMode, Collection, CollectionSpec, ConfigDocument, FusionSettings, MetricKind, MetricSpec,
    NormalizationScope, PairingMode, Variant, VariantSpec,
};
pub use manifest::{CorrespondenceSet, CorrespondenceSource, EmbeddingManifest, Keypoint, KeypointManifest};
pub use types::{Domain, ImageRef, NormalizationStats, PairScore, VariantRecord, ENGINE_VERSION};
