//! Criterion benchmarks for the labeling and training hot paths; run with
//! `cargo bench -p claimgram-bench`.
