//! Criterion benchmarks for the drive simulator live in `benches/`.
