//! Shared inputs for the benchmarks.

use vvot::static_ot::random_instance;
use vvot::{DiscreteVectorMeasure, WeightedGraph};

/// A seeded random pair together with the matching graph (two nodes or `K₃`).
pub fn instance(seed: u64, max_atoms: usize) -> (WeightedGraph, DiscreteVectorMeasure, DiscreteVectorMeasure) {
    let (n, mu, nu) = random_instance(seed, max_atoms).expect("seeded instance");
    let g = if n == 2 { WeightedGraph::two_node(1.0) } else { WeightedGraph::complete(n, 1.0) };
    (g.expect("valid graph"), mu, nu)
}
