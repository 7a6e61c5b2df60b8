//! Shared fixtures for the criterion benches.

use hybrid_sketch::datasets::{gen_noisy_binary, gen_power_law, NoisyBinarySpec, PowerLawSpec};
use hybrid_sketch::{Matrix, Triple};

pub const SEED: u64 = 2024;

pub fn noisy_binary(n: usize) -> Matrix {
    gen_noisy_binary(&NoisyBinarySpec::new(n, 0.1, SEED)).expect("noisy-binary").1
}

pub fn power_law(n: usize) -> Matrix {
    gen_power_law(&PowerLawSpec {
        n,
        k: 5,
        gamma: 1.0,
        seed: SEED,
    })
    .expect("power-law")
}

pub fn triples(a: &Matrix) -> Vec<Triple> {
    a.nonzeros().map(|(i, j, v)| Triple::new(i, j, v)).collect()
}
