//! Criterion benchmarks for the preprocessor; see `benches/pipeline.rs`.
