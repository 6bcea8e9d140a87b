//! Criterion benchmarks for the model library; see `benches/`.
