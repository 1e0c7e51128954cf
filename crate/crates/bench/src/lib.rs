//! Criterion benchmarks for `kinspread`; see `benches/`.
