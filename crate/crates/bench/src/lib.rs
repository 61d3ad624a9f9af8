//! Criterion benchmarks for the detectors; see `benches/`.
