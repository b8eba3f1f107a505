//! Random-graph generators and perturbation operators for the simulation
//! harness: inhomogeneous Erdos-Renyi sampling, stochastic block models,
//! density scaling, planted-ER and edge-toggle perturbations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, PopulationAdjacency};

/// Reproducibility seed. Derived streams are obtained by mixing tag words
/// into the base value (splitmix64 finalizer), so e.g. one stream per
/// Monte-Carlo trial index is independent of scheduling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed(pub u64);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Deterministic child seed for a tagged substream.
    pub fn derive(&self, tags: &[u64]) -> Seed {
        let mut s = splitmix(self.0);
        for &t in tags {
            s = splitmix(s ^ splitmix(t));
        }
        Seed(s)
    }

    /// Portable, seedable PRNG for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Stochastic block model specification: block sizes plus the symmetric
/// block probability matrix B.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl SbmSpec {
    pub fn new(block_sizes: Vec<usize>, b: Vec<Vec<f64>>) -> Result<Self> {
        let r = block_sizes.len();
        if r == 0 || block_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter("block sizes must be positive".into()));
        }
        if b.len() != r || b.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidParameter("B must be r x r".into()));
        }
        for i in 0..r {
            for j in 0..r {
                if !(0.0..=1.0).contains(&b[i][j]) {
                    return Err(Error::InvalidParameter(format!("B[{i}][{j}] outside [0,1]")));
                }
                if b[i][j] != b[j][i] {
                    return Err(Error::InvalidParameter("B must be symmetric".into()));
                }
            }
        }
        Ok(SbmSpec { block_sizes, b })
    }

    /// Two equal blocks with within-probability `p` and between-probability `q`.
    pub fn two_block(n: usize, p: f64, q: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("two-block model needs n >= 2".into()));
        }
        let half = n / 2;
        SbmSpec::new(vec![half, n - half], vec![vec![p, q], vec![q, p]])
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Block label of each vertex (blocks are contiguous id ranges).
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n());
        for (k, &size) in self.block_sizes.iter().enumerate() {
            labels.extend(std::iter::repeat(k).take(size));
        }
        labels
    }
}

/// Population adjacency with p[i][j] = B[block(i)][block(j)] off the diagonal.
pub fn sbm_population_adjacency(spec: &SbmSpec) -> PopulationAdjacency {
    let n = spec.n();
    let labels = spec.labels();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[(i, j)] = spec.b[labels[i]][labels[j]];
            }
        }
    }
    PopulationAdjacency::new(p).expect("validated spec yields a valid population adjacency")
}

/// Independent Bernoulli(P_ij) draws above the diagonal, mirrored below.
pub fn sample_ier(p: &PopulationAdjacency, seed: Seed) -> Graph {
    let n = p.n();
    let mut rng = seed.rng();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = p.entry(i, j);
            if rng.gen::<f64>() < prob {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Graph::from_sorted_edges(n, edges)
}

/// Multiply every off-diagonal entry by `rho`, clamping to [0,1].
/// Returns the scaled matrix and the number of clamped entries (unordered pairs).
pub fn scale_density(p: &PopulationAdjacency, rho: f64) -> Result<(PopulationAdjacency, usize)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let n = p.n();
    let mut m = p.matrix().clone();
    let mut clamped = 0;
    for i in 0..n {
        for j in i + 1..n {
            let v = m[(i, j)] * rho;
            let c = v.clamp(0.0, 1.0);
            if c != v {
                clamped += 1;
            }
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok((PopulationAdjacency::new(m)?, clamped))
}

/// Replace the subgraph induced by a uniformly random k-subset with an
/// Erdos-Renyi graph of edge probability `p_er`; edges outside untouched.
pub fn plant_er_subgraph(g: &Graph, k: usize, p_er: f64, seed: Seed) -> Result<Graph> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("subset size {k} out of range 1..={n}")));
    }
    if !(0.0..=1.0).contains(&p_er) {
        return Err(Error::InvalidParameter(format!("edge probability {p_er} outside [0,1]")));
    }
    let mut rng = seed.rng();
    // uniform k-subset by partial Fisher-Yates
    let mut ids: Vec<usize> = (0..n).collect();
    for t in 0..k {
        let pick = rng.gen_range(t..n);
        ids.swap(t, pick);
    }
    let mut subset = ids[..k].to_vec();
    subset.sort_unstable();

    let mut out = g.clone();
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            let present = rng.gen::<f64>() < p_er;
            out.set_pair(i, j, present);
        }
    }
    out.rebuild_edges();
    Ok(out)
}

/// Flip `count` distinct unordered pairs chosen uniformly without replacement.
pub fn toggle_edges(g: &Graph, count: usize, seed: Seed) -> Result<Graph> {
    let n = g.n();
    let total = n * (n - 1) / 2;
    if count > total {
        return Err(Error::InvalidParameter(format!("cannot toggle {count} of {total} pairs")));
    }
    let mut rng = seed.rng();
    // sparse Fisher-Yates over pair indices
    let mut swapped: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut out = g.clone();
    for t in 0..count {
        let pick = rng.gen_range(t..total);
        let chosen = *swapped.get(&pick).unwrap_or(&pick);
        let at_t = *swapped.get(&t).unwrap_or(&t);
        swapped.insert(pick, at_t);
        let (i, j) = unrank_pair(chosen, n);
        out.flip_edge(i, j);
    }
    out.rebuild_edges();
    Ok(out)
}

/// Inverse of the lexicographic ranking of pairs (i, j) with i < j.
fn unrank_pair(mut idx: usize, n: usize) -> (usize, usize) {
    for i in 0..n - 1 {
        let row = n - 1 - i;
        if idx < row {
            return (i, i + 1 + idx);
        }
        idx -= row;
    }
    unreachable!("pair index out of range");
}
