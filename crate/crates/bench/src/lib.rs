//! Benchmarks for the operator and the toy training step; run with `cargo bench -p gdconv-bench`.
