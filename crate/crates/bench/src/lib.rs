//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sgcca::{design_preset, generate, BlockSet, DesignGraph, GenSpec};

/// l1 budgets used on the default synthetic design.
pub const SPARSITY: [f64; 3] = [7.6, 8.7, 8.05];

/// Seeded standard normal vector of length `p`.
pub fn normal_vector(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Default synthetic blocks with the hierarchical design.
pub fn synthetic(seed: u64) -> (BlockSet, DesignGraph) {
    let (bs, _) = generate(&GenSpec::standard(seed)).expect("default spec is valid");
    (bs, design_preset("hierarchical").expect("known preset"))
}
