//! Instance builders shared by the benchmarks in `benches/`.

use biasmax::{gen_synthetic1, gen_synthetic2, SyntheticData, SyntheticParams1};

/// Dataset-2 instance with the default heavy-tail and half/half groups.
pub fn synthetic2(n: usize, seed: u64) -> SyntheticData {
    gen_synthetic2(n, 2.0, 0.5, 0.1, seed).expect("valid synthetic2 parameters")
}

/// Dataset-1 instance with default parameters apart from `n` and `k`.
pub fn synthetic1(n: usize, k: usize, seed: u64) -> SyntheticData {
    let params = SyntheticParams1 { n, k, beta: 0.1, ..SyntheticParams1::default() };
    gen_synthetic1(&params, seed).expect("valid synthetic1 parameters")
}
