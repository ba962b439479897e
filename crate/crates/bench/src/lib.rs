//! Benchmarks for the airdroplab solvers live in `benches/`.
