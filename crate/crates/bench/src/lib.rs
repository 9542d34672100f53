//! Criterion microbenchmarks live in benches/; this crate has no library code.
