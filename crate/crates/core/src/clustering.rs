//! Community recovery for the Tracy-Widom test: spectral embedding of the
//! averaged adjacency followed by k-means, plus loading of externally
//! supplied partitions.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{CommunityPartition, Graph};
use crate::linalg::{truncated_svd_op, LinalgConfig, SparseSym};
use crate::models::Seed;

#[derive(Debug, Clone)]
pub struct ClusteringConfig {
    /// Number of blocks to recover.
    pub r: usize,
    pub kmeans_restarts: usize,
    pub kmeans_iters: usize,
    pub seed: Seed,
    pub linalg: LinalgConfig,
}

impl ClusteringConfig {
    pub fn new(r: usize, seed: Seed) -> Self {
        ClusteringConfig {
            r,
            kmeans_restarts: 20,
            kmeans_iters: 100,
            seed,
            linalg: LinalgConfig::default(),
        }
    }
}

/// Estimate a common block structure from two graphs: embed the degree
/// normalized average (A_G + A_H)/2 by its top-r singular vectors, normalize
/// the embedding rows, and cluster them with restarted k-means. Vertices
/// isolated in both graphs are assigned to the largest recovered block.
pub fn spectral_partition(g: &Graph, h: &Graph, cfg: &ClusteringConfig) -> Result<CommunityPartition> {
    let n = g.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch { left: n, right: h.n() });
    }
    if cfg.r == 0 || cfg.r > n {
        return Err(Error::InvalidParameter(format!("block count {} out of range 1..={n}", cfg.r)));
    }
    if cfg.r == 1 {
        return CommunityPartition::new(vec![0; n], 1);
    }

    // M = (A_G + A_H)/2 as a sparse symmetric matrix
    let mut weights = std::collections::BTreeMap::new();
    for &(i, j) in g.edges() {
        *weights.entry((i, j)).or_insert(0.0) += 0.5;
    }
    for &(i, j) in h.edges() {
        *weights.entry((i, j)).or_insert(0.0) += 0.5;
    }
    let mut deg = vec![0.0f64; n];
    for (&(i, j), &w) in &weights {
        deg[i as usize] += w;
        deg[j as usize] += w;
    }
    let isolated: Vec<bool> = deg.iter().map(|&d| d == 0.0).collect();
    // degree floor keeps D^{-1/2} finite on isolated vertices
    let dinv: Vec<f64> = deg.iter().map(|&d| 1.0 / d.max(1e-9).sqrt()).collect();
    let entries: Vec<(u32, u32, f64)> = weights
        .into_iter()
        .map(|((i, j), w)| (i, j, w * dinv[i as usize] * dinv[j as usize]))
        .collect();
    let op = SparseSym::new(n, entries);

    let svd = truncated_svd_op(&op, cfg.r, &cfg.linalg)?;
    let mut rows = svd.u;
    for i in 0..n {
        let norm = rows.row(i).norm();
        if norm > 0.0 {
            for c in 0..cfg.r {
                rows[(i, c)] /= norm;
            }
        }
    }

    let mut labels = kmeans(&rows, cfg)?;

    // post-hoc: isolated vertices carry no signal, park them in the largest block
    let mut sizes = vec![0usize; cfg.r];
    for &l in &labels {
        sizes[l] += 1;
    }
    let largest = (0..cfg.r).max_by_key(|&k| sizes[k]).unwrap();
    for (v, &iso) in isolated.iter().enumerate() {
        if iso {
            labels[v] = largest;
        }
    }
    CommunityPartition::from_raw_labels(&labels)
}

fn kmeans(rows: &DMatrix<f64>, cfg: &ClusteringConfig) -> Result<Vec<usize>> {
    let n = rows.nrows();
    let r = cfg.r;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..cfg.kmeans_restarts as u64 {
        let mut rng = cfg.seed.derive(&[0x6b6d_6561_6e73, restart]).rng();
        let mut centers = init_plusplus(rows, r, &mut rng);
        let mut labels = vec![0usize; n];
        for _ in 0..cfg.kmeans_iters {
            let mut moved = false;
            for i in 0..n {
                let mut arg = 0;
                let mut best_d = f64::INFINITY;
                for (k, c) in centers.iter().enumerate() {
                    let d = sq_dist(rows, i, c);
                    if d < best_d {
                        best_d = d;
                        arg = k;
                    }
                }
                if labels[i] != arg {
                    labels[i] = arg;
                    moved = true;
                }
            }
            recompute_centers(rows, &labels, &mut centers, &mut rng);
            if !moved {
                break;
            }
        }
        let cost: f64 = (0..n).map(|i| sq_dist(rows, i, &centers[labels[i]])).sum();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, labels));
        }
    }
    Ok(best.unwrap().1)
}

fn sq_dist(rows: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    (0..rows.ncols()).map(|c| (rows[(i, c)] - center[c]).powi(2)).sum()
}

/// k-means++ seeding: each next center drawn with probability proportional
/// to the squared distance from the nearest chosen center.
fn init_plusplus(rows: &DMatrix<f64>, r: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = rows.nrows();
    let row = |i: usize| -> Vec<f64> { (0..rows.ncols()).map(|c| rows[(i, c)]).collect() };
    let mut centers = vec![row(rng.gen_range(0..n))];
    let mut dists: Vec<f64> = (0..n).map(|i| sq_dist(rows, i, &centers[0])).collect();
    while centers.len() < r {
        let total: f64 = dists.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(row(pick));
        for i in 0..n {
            let d = sq_dist(rows, i, centers.last().unwrap());
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }
    centers
}

fn recompute_centers(
    rows: &DMatrix<f64>,
    labels: &[usize],
    centers: &mut [Vec<f64>],
    rng: &mut impl Rng,
) {
    let n = rows.nrows();
    let dim = rows.ncols();
    let r = centers.len();
    let mut counts = vec![0usize; r];
    for c in centers.iter_mut() {
        c.iter_mut().for_each(|v| *v = 0.0);
    }
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for c in 0..dim {
            centers[l][c] += rows[(i, c)];
        }
    }
    for k in 0..r {
        if counts[k] > 0 {
            for c in 0..dim {
                centers[k][c] /= counts[k] as f64;
            }
        } else {
            // empty cluster: reseat at the point farthest from its center
            let mut arg = rng.gen_range(0..n);
            let mut best = -1.0;
            for i in 0..n {
                let d = sq_dist(rows, i, &centers[labels[i]]);
                if d > best {
                    best = d;
                    arg = i;
                }
            }
            for c in 0..dim {
                centers[k][c] = rows[(arg, c)];
            }
        }
    }
}

/// Load a partition file: one block id per line (vertex order), blank lines
/// and `#` comments ignored. Labels are compacted in first-appearance order.
pub fn load_partition(path: &Path) -> Result<CommunityPartition> {
    let text = fs::read_to_string(path)?;
    parse_partition(&text)
}

pub fn parse_partition(text: &str) -> Result<CommunityPartition> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let label: usize = line.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("invalid block id {line:?}"),
        })?;
        raw.push(label);
    }
    CommunityPartition::from_raw_labels(&raw)
}
