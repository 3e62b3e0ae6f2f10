//! Criterion benchmarks for the seme kernels; see `benches/`.
