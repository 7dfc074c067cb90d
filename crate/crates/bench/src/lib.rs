//! Criterion benchmarks for the radsynth kernels live in `benches/`; run them with
//! `cargo bench -p radsynth-bench`.
