//! Placeholder: the benchmarks live under benches/.
