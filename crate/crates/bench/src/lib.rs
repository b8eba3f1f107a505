//! Shared fixtures for the criterion benchmarks.

use graph2sample::models::{sample_ier, sbm_population_adjacency, SbmSpec, Seed};
use graph2sample::{Graph, GraphPopulation};

/// Two-block SBM populations at the paper's default densities.
pub fn sbm_populations(n: usize, m: usize, eps: f64, seed: u64) -> (GraphPopulation, GraphPopulation) {
    let null = SbmSpec::two_block(n, 0.1, 0.05).unwrap();
    let alt = SbmSpec::two_block(n, 0.1 + eps, 0.05).unwrap();
    let pa_g = sbm_population_adjacency(&null);
    let pa_h = sbm_population_adjacency(&alt);
    let g: Vec<Graph> = (0..m as u64)
        .map(|k| sample_ier(&pa_g, Seed(seed).derive(&[0, k])))
        .collect();
    let h: Vec<Graph> = (0..m as u64)
        .map(|k| sample_ier(&pa_h, Seed(seed).derive(&[1, k])))
        .collect();
    (GraphPopulation::new(g).unwrap(), GraphPopulation::new(h).unwrap())
}
