//! Criterion benchmarks for `zic-core`; see `benches/`.
