//! Criterion benchmarks for the gridcascade pipeline live in `benches/`.
