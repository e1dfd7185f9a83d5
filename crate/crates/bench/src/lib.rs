//! Benchmarks for the stvs pipeline live under `benches/`.
