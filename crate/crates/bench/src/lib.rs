//! Criterion benchmarks for the metric kernels and the fusion fit; see `benches/`.
