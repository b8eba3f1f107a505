//! Tests for a single pair of graphs (m = 1): adjacency spectral embedding
//! distances with a fitted-model bootstrap, and the asymptotic Tracy-Widom
//! test on the block-normalized difference matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::clustering::{spectral_partition, ClusteringConfig};
use crate::dist::{tw1_cdf, tw1_min_two_sided_p, tw1_table};
use crate::error::{Error, Result};
use crate::graph::{CommunityPartition, Graph, PopulationAdjacency, TestOutcome};
use crate::linalg::{
    extreme_eigenvalues_op, spectral_norm_op, truncated_svd_op, LinalgConfig, SparseSym,
};
use crate::models::{sample_ier, Seed};
use crate::multi::{check_alpha, BootstrapConfig};

fn adjacency_op(g: &Graph) -> SparseSym {
    let entries = g.edges().iter().map(|&(i, j)| (i, j, 1.0)).collect();
    SparseSym::new(g.n(), entries)
}

/// Rank-r adjacency spectral embedding X = U Sigma^{1/2}, rows indexed by
/// vertex. Signs are fixed deterministically by the underlying SVD.
pub fn ase(g: &Graph, r: usize, cfg: &LinalgConfig) -> Result<DMatrix<f64>> {
    let svd = truncated_svd_op(&adjacency_op(g), r, cfg)?;
    let mut x = svd.u;
    for c in 0..r {
        let s = svd.sigma[c].max(0.0).sqrt();
        for i in 0..x.nrows() {
            x[(i, c)] *= s;
        }
    }
    Ok(x)
}

fn check_same_n(g: &Graph, h: &Graph) -> Result<usize> {
    if g.n() != h.n() {
        return Err(Error::DimensionMismatch { left: g.n(), right: h.n() });
    }
    Ok(g.n())
}

/// Sign-aligned distance between the two rank-r embeddings: each column of Y
/// is flipped to best match the corresponding column of X, i.e. the alignment
/// W ranges over diagonal +-1 matrices. This resolves the inherent sign
/// ambiguity of singular vectors while keeping each coordinate's basis fixed,
/// so trailing coordinates of an over-specified rank keep their sampling
/// variability instead of being rotated onto each other. At r = 1 the
/// alignment coincides with the minimum over all orthogonal W.
pub fn stat_ase(g: &Graph, h: &Graph, r: usize, cfg: &LinalgConfig) -> Result<f64> {
    check_same_n(g, h)?;
    let x = ase(g, r, cfg)?;
    let y = ase(h, r, cfg)?;
    let mut d2 = 0.0;
    for c in 0..r {
        let xc = x.column(c);
        let yc = y.column(c);
        d2 += xc.norm_squared() + yc.norm_squared() - 2.0 * xc.dot(&yc).abs();
    }
    Ok(d2.max(0.0).sqrt())
}

/// Frobenius distance between the two rank-r estimated probability matrices
/// ||X X^T - Y Y^T||_F, evaluated through r x r Gram matrices.
pub fn stat_epa(g: &Graph, h: &Graph, r: usize, cfg: &LinalgConfig) -> Result<f64> {
    check_same_n(g, h)?;
    let x = ase(g, r, cfg)?;
    let y = ase(h, r, cfg)?;
    // ||XX^T - YY^T||_F^2 = ||X^T X||_F^2 + ||Y^T Y||_F^2 - 2 ||X^T Y||_F^2
    let xtx = x.transpose() * &x;
    let yty = y.transpose() * &y;
    let xty = x.transpose() * &y;
    let d2 = xtx.norm_squared() + yty.norm_squared() - 2.0 * xty.norm_squared();
    Ok(d2.max(0.0).sqrt())
}

/// Rank-r estimated edge-probability matrix X X^T, clamped to [0,1] with a
/// zero diagonal, suitable for sampling bootstrap replicates.
pub fn fitted_probabilities(g: &Graph, r: usize, cfg: &LinalgConfig) -> Result<PopulationAdjacency> {
    let x = ase(g, r, cfg)?;
    let n = g.n();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = (0..r).map(|c| x[(i, c)] * x[(j, c)]).sum();
            let v = v.clamp(0.0, 1.0);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    PopulationAdjacency::new(p)
}

/// Statistic used by the fitted-model bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleBootStatistic {
    Ase,
    Epa,
}

impl SingleBootStatistic {
    fn name(&self) -> &'static str {
        match self {
            SingleBootStatistic::Ase => "boot-ase",
            SingleBootStatistic::Epa => "boot-epa",
        }
    }

    fn eval(&self, g: &Graph, h: &Graph, r: usize, cfg: &LinalgConfig) -> Result<f64> {
        match self {
            SingleBootStatistic::Ase => stat_ase(g, h, r, cfg),
            SingleBootStatistic::Epa => stat_epa(g, h, r, cfg),
        }
    }
}

/// Fitted-model bootstrap for one pair of graphs: a rank-r model is fitted to
/// each input in turn, b fresh pairs are sampled from it to build the null
/// distribution, and the final p-value is the maximum of the two sides.
pub fn test_boot_single(
    g: &Graph,
    h: &Graph,
    which: SingleBootStatistic,
    r: usize,
    alpha: f64,
    cfg: &BootstrapConfig,
    linalg: &LinalgConfig,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    check_same_n(g, h)?;
    let observed = which.eval(g, h, r, linalg)?;
    let mut side_p = [0.0f64; 2];
    for (side, fit_from) in [g, h].iter().enumerate() {
        let fitted = fitted_probabilities(fit_from, r, linalg)?;
        let exceed = (0..cfg.b as u64)
            .into_par_iter()
            .map(|iter| {
                let s = cfg.seed.derive(&[side as u64, iter]);
                let a = sample_ier(&fitted, s.derive(&[0]));
                let b = sample_ier(&fitted, s.derive(&[1]));
                let t = which.eval(&a, &b, r, linalg).expect("bootstrap statistic");
                (t >= observed) as usize
            })
            .sum::<usize>();
        side_p[side] = (exceed as f64 + 0.5) / cfg.b as f64;
    }
    let p = side_p[0].max(side_p[1]).min(1.0);
    Ok(TestOutcome::new(which.name(), observed, p, alpha)
        .with_detail("b", cfg.b as u64)
        .with_detail("rank", r as u64)
        .with_detail("p_fit_g", side_p[0].min(1.0))
        .with_detail("p_fit_h", side_p[1].min(1.0)))
}

/// Block-averaged edge-probability estimates for both graphs under a common
/// partition. Within-block estimates for singleton blocks have no pairs to
/// average and are set to zero; `singleton_blocks` counts them.
#[derive(Debug, Clone)]
pub struct BlockApproxPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub singleton_blocks: usize,
}

pub fn block_approx(g: &Graph, h: &Graph, partition: &CommunityPartition) -> Result<BlockApproxPair> {
    let n = check_same_n(g, h)?;
    if partition.n() != n {
        return Err(Error::DimensionMismatch { left: partition.n(), right: n });
    }
    let r = partition.r();
    let labels = partition.labels();
    let sizes = partition.block_sizes();

    let mut counts = DMatrix::zeros(r, r);
    for k in 0..r {
        for l in 0..r {
            counts[(k, l)] = if k == l {
                (sizes[k] * (sizes[k] - 1) / 2) as f64
            } else {
                (sizes[k] * sizes[l]) as f64
            };
        }
    }
    let singleton_blocks = sizes.iter().filter(|&&s| s == 1).count();

    let sums = |graph: &Graph| -> DMatrix<f64> {
        let mut s = DMatrix::zeros(r, r);
        for &(i, j) in graph.edges() {
            let (a, b) = (labels[i as usize], labels[j as usize]);
            s[(a, b)] += 1.0;
            if a != b {
                s[(b, a)] += 1.0;
            }
        }
        s
    };
    let mean = |s: DMatrix<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(r, r, |k, l| {
            if counts[(k, l)] > 0.0 {
                s[(k, l)] / counts[(k, l)]
            } else {
                0.0
            }
        })
    };
    Ok(BlockApproxPair {
        p: mean(sums(g)),
        q: mean(sums(h)),
        singleton_blocks,
    })
}

/// Tracy-Widom statistic and diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TwStat {
    /// n^{2/3} (||C||_2 - 2)
    pub value: f64,
    pub spectral_norm: f64,
    /// Differing pairs whose variance denominator was zero (entry dropped).
    pub zero_denominator_pairs: usize,
}

/// Normalized-difference spectral statistic with block-constant variance
/// estimates. Entries where both adjacencies agree are zero by construction;
/// differing pairs with a zero denominator contribute nothing and are counted.
pub fn stat_tw(
    g: &Graph,
    h: &Graph,
    partition: &CommunityPartition,
    cfg: &LinalgConfig,
) -> Result<TwStat> {
    let approx = block_approx(g, h, partition)?;
    let n = g.n() as f64;
    let labels = partition.labels();
    let denom = |i: usize, j: usize| -> f64 {
        let (a, b) = (labels[i], labels[j]);
        let p = approx.p[(a, b)];
        let q = approx.q[(a, b)];
        (n - 1.0) * (p * (1.0 - p) + q * (1.0 - q))
    };
    normalized_difference_stat(g, h, cfg, denom)
}

/// Same statistic but normalized by known edge probabilities instead of
/// block-averaged estimates.
pub fn stat_tw_known(
    g: &Graph,
    h: &Graph,
    p: &PopulationAdjacency,
    q: &PopulationAdjacency,
    cfg: &LinalgConfig,
) -> Result<TwStat> {
    let n = check_same_n(g, h)?;
    if p.n() != n || q.n() != n {
        return Err(Error::DimensionMismatch { left: p.n(), right: n });
    }
    let nf = n as f64;
    let denom = |i: usize, j: usize| -> f64 {
        let (pe, qe) = (p.entry(i, j), q.entry(i, j));
        (nf - 1.0) * (pe * (1.0 - pe) + qe * (1.0 - qe))
    };
    normalized_difference_stat(g, h, cfg, denom)
}

/// Sparse entries of the normalized difference matrix: nonzero only where
/// the adjacencies differ, with value +-1/sqrt(denominator).
fn normalized_difference_entries(
    g: &Graph,
    h: &Graph,
    denom: impl Fn(usize, usize) -> f64,
) -> (Vec<(u32, u32, f64)>, usize) {
    let mut entries = Vec::new();
    let mut zero_denominator_pairs = 0;
    let mut push = |i: u32, j: u32, sign: f64| {
        let d = denom(i as usize, j as usize);
        if d > 0.0 {
            entries.push((i, j, sign / d.sqrt()));
        } else {
            zero_denominator_pairs += 1;
        }
    };
    for &(i, j) in g.edges() {
        if !h.has_edge(i as usize, j as usize) {
            push(i, j, 1.0);
        }
    }
    for &(i, j) in h.edges() {
        if !g.has_edge(i as usize, j as usize) {
            push(i, j, -1.0);
        }
    }
    (entries, zero_denominator_pairs)
}

fn normalized_difference_stat(
    g: &Graph,
    h: &Graph,
    cfg: &LinalgConfig,
    denom: impl Fn(usize, usize) -> f64,
) -> Result<TwStat> {
    let n = check_same_n(g, h)?;
    let (entries, zero_denominator_pairs) = normalized_difference_entries(g, h, denom);
    let norm = if entries.is_empty() {
        0.0
    } else {
        spectral_norm_op(&SparseSym::new(n, entries), cfg)?
    };
    Ok(TwStat {
        value: (n as f64).powf(2.0 / 3.0) * (norm - 2.0),
        spectral_norm: norm,
        zero_denominator_pairs,
    })
}

/// Largest eigenvalue (not the spectral norm) of the normalized difference
/// built with known edge probabilities; exposes the raw matrix whose scaled
/// top eigenvalue follows the Tracy-Widom law under the null.
pub fn normalized_difference_lambda_max(
    g: &Graph,
    h: &Graph,
    p: &PopulationAdjacency,
    q: &PopulationAdjacency,
    cfg: &LinalgConfig,
) -> Result<f64> {
    let n = check_same_n(g, h)?;
    if p.n() != n || q.n() != n {
        return Err(Error::DimensionMismatch { left: p.n(), right: n });
    }
    let nf = n as f64;
    let (entries, _) = normalized_difference_entries(g, h, |i, j| {
        let (pe, qe) = (p.entry(i, j), q.entry(i, j));
        (nf - 1.0) * (pe * (1.0 - pe) + qe * (1.0 - qe))
    });
    if entries.is_empty() {
        return Ok(0.0);
    }
    Ok(extreme_eigenvalues_op(&SparseSym::new(n, entries), cfg)?.lambda_max)
}

/// Two-sided Tracy-Widom p-value 2 (1 - F(t)), clamped to [floor, 1] where
/// the floor reflects the finite support of the tabulated distribution.
pub(crate) fn tw_two_sided_p(t: f64) -> f64 {
    let p = 2.0 * (1.0 - tw1_cdf(t));
    let floor = tw1_min_two_sided_p();
    p.max(floor).min(1.0)
}

/// Controls for [`test_asymp_tw`].
#[derive(Debug, Clone)]
pub struct TwOptions {
    /// Blocks to recover when no partition is supplied.
    pub r: usize,
    /// Smallest n at which the asymptotic reference is trusted.
    pub min_n: usize,
    pub cluster_seed: Seed,
    pub linalg: LinalgConfig,
}

impl TwOptions {
    pub fn new(r: usize, cluster_seed: Seed) -> Self {
        TwOptions { r, min_n: 20, cluster_seed, linalg: LinalgConfig::default() }
    }
}

/// Asymptotic test of the normalized difference matrix against the
/// Tracy-Widom law. Uses the supplied partition when given, otherwise
/// estimates one by spectral clustering of the averaged adjacency.
pub fn test_asymp_tw(
    g: &Graph,
    h: &Graph,
    alpha: f64,
    partition: Option<&CommunityPartition>,
    opts: &TwOptions,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let n = check_same_n(g, h)?;
    if n < opts.min_n {
        return Err(Error::InvalidParameter(format!(
            "n = {n} below the minimum {} for the asymptotic reference",
            opts.min_n
        )));
    }
    let estimated;
    let (part, estimated_partition) = match partition {
        Some(p) => (p, false),
        None => {
            let mut ccfg = ClusteringConfig::new(opts.r, opts.cluster_seed);
            ccfg.linalg = opts.linalg.clone();
            estimated = spectral_partition(g, h, &ccfg)?;
            (&estimated, true)
        }
    };
    let stat = stat_tw(g, h, part, &opts.linalg)?;
    let p = tw_two_sided_p(stat.value);
    let saturated = stat.value >= tw1_table().x_max();
    Ok(TestOutcome::new("asymp-tw", stat.value, p, alpha)
        .with_detail("spectral_norm", stat.spectral_norm)
        .with_detail("zero_denominator_pairs", stat.zero_denominator_pairs as u64)
        .with_detail("estimated_partition", estimated_partition)
        .with_detail("blocks", part.r() as u64)
        .with_detail("saturated", saturated))
}
