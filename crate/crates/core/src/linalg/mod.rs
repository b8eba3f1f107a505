//! Spectral kernels shared by the test statistics: spectral norm, extreme
//! eigenvalues, truncated SVD of symmetric matrices, orthogonal Procrustes.

mod lanczos;

pub use lanczos::{RitzPairs, Target};

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense/iterative crossover and Lanczos controls.
#[derive(Debug, Clone)]
pub struct LinalgConfig {
    /// Matrices at or below this dimension take the dense eigensolve path.
    pub dense_crossover: usize,
    /// Relative residual tolerance for the iterative path.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        LinalgConfig { dense_crossover: 512, tol: 1e-9, max_iter: 600 }
    }
}

/// Symmetric linear operator with a deterministic structural seed used to
/// derive the Lanczos starting vector.
pub trait SymOp: Sync {
    fn dim(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn op_seed(&self) -> u64;
}

/// Borrowed dense symmetric matrix.
pub struct DenseSym<'a>(pub &'a DMatrix<f64>);

impl SymOp for DenseSym<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let a = self.0;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a[(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }

    fn op_seed(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let n = self.dim();
        n.hash(&mut h);
        let stride = (n * n / 256).max(1);
        for k in (0..n * n).step_by(stride) {
            self.0[(k / n, k % n)].to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Sparse symmetric matrix stored as weighted upper-triangle entries plus an
/// optional diagonal; matvec is O(nnz).
pub struct SparseSym {
    n: usize,
    /// (i, j, w) with i < j; contributes w to both (i,j) and (j,i).
    entries: Vec<(u32, u32, f64)>,
    diag: Vec<f64>,
}

impl SparseSym {
    pub fn new(n: usize, entries: Vec<(u32, u32, f64)>) -> Self {
        debug_assert!(entries.iter().all(|&(i, j, _)| (i as usize) < n && i < j && (j as usize) < n));
        SparseSym { n, entries, diag: vec![0.0; n] }
    }

    pub fn with_diag(mut self, diag: Vec<f64>) -> Self {
        assert_eq!(diag.len(), self.n);
        self.diag = diag;
        self
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            a[(i, i)] = self.diag[i];
        }
        for &(i, j, w) in &self.entries {
            a[(i as usize, j as usize)] = w;
            a[(j as usize, i as usize)] = w;
        }
        a
    }
}

impl SymOp for SparseSym {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = self.diag[i] * x[i];
        }
        for &(i, j, w) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            y[i] += w * x[j];
            y[j] += w * x[i];
        }
    }

    fn op_seed(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n.hash(&mut h);
        self.entries.len().hash(&mut h);
        let stride = (self.entries.len() / 512).max(1);
        for e in self.entries.iter().step_by(stride) {
            e.0.hash(&mut h);
            e.1.hash(&mut h);
            e.2.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Extreme symmetric eigenvalues.
#[derive(Debug, Clone, Copy)]
pub struct SymEigResult {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Truncated symmetric SVD: A ~ U diag(sigma) V^T with sigma nonincreasing.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn check_square_symmetric(a: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::InvalidParameter("matrix must be square and nonempty".into()));
    }
    Ok(n)
}

/// Materialize a small operator so it can take the dense path.
fn densify(op: &dyn SymOp) -> DMatrix<f64> {
    let n = op.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    a
}

fn dense_extremes(a: &DMatrix<f64>) -> SymEigResult {
    let eig = a.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    SymEigResult { lambda_max: hi, lambda_min: lo, iterations: 0, residual: 0.0 }
}

/// Largest and smallest eigenvalue of a symmetric operator.
pub fn extreme_eigenvalues_op(op: &dyn SymOp, cfg: &LinalgConfig) -> Result<SymEigResult> {
    if op.dim() <= cfg.dense_crossover {
        return Ok(dense_extremes(&densify(op)));
    }
    let pairs = lanczos::lanczos(op, Target::BothEnds, false, cfg.tol, cfg.max_iter)?;
    let lambda_max = pairs.values[0];
    let lambda_min = *pairs.values.last().unwrap();
    Ok(SymEigResult {
        lambda_max,
        lambda_min,
        iterations: pairs.iterations,
        residual: pairs.residual,
    })
}

pub fn extreme_eigenvalues(a: &DMatrix<f64>, cfg: &LinalgConfig) -> Result<SymEigResult> {
    check_square_symmetric(a)?;
    extreme_eigenvalues_op(&DenseSym(a), cfg)
}

/// Spectral norm max(|lambda_1|, |lambda_n|) of a symmetric operator.
pub fn spectral_norm_op(op: &dyn SymOp, cfg: &LinalgConfig) -> Result<f64> {
    let r = extreme_eigenvalues_op(op, cfg)?;
    Ok(r.lambda_max.abs().max(r.lambda_min.abs()))
}

pub fn spectral_norm(a: &DMatrix<f64>, cfg: &LinalgConfig) -> Result<f64> {
    check_square_symmetric(a)?;
    spectral_norm_op(&DenseSym(a), cfg)
}

/// Deterministic sign fix: the entry of largest magnitude in each left
/// singular vector is made nonnegative (u and v flip together).
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for c in 0..u.ncols() {
        let mut arg = 0;
        let mut best = -1.0f64;
        for i in 0..u.nrows() {
            let m = u[(i, c)].abs();
            if m > best {
                best = m;
                arg = i;
            }
        }
        if u[(arg, c)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, c)] = -u[(i, c)];
                v[(i, c)] = -v[(i, c)];
            }
        }
    }
}

fn svd_from_eigenpairs(values: &[f64], vectors: &DMatrix<f64>, r: usize) -> TruncatedSvd {
    // For symmetric A = sum lambda v v^T the singular triplets are
    // (|lambda|, sign(lambda) v, v), ordered by |lambda| descending.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().partial_cmp(&values[a].abs()).unwrap());
    order.truncate(r);

    let n = vectors.nrows();
    let mut u = DMatrix::zeros(n, order.len());
    let mut v = DMatrix::zeros(n, order.len());
    let mut sigma = DVector::zeros(order.len());
    for (c, &idx) in order.iter().enumerate() {
        let lam = values[idx];
        sigma[c] = lam.abs();
        let sign = if lam < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            u[(i, c)] = sign * vectors[(i, idx)];
            v[(i, c)] = vectors[(i, idx)];
        }
    }
    fix_signs(&mut u, &mut v);
    TruncatedSvd { u, sigma, v }
}

/// Top-`r` singular triplets of a symmetric operator.
pub fn truncated_svd_op(op: &dyn SymOp, r: usize, cfg: &LinalgConfig) -> Result<TruncatedSvd> {
    let n = op.dim();
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!("rank {r} out of range for n = {n}")));
    }
    if n <= cfg.dense_crossover || r * 4 >= n {
        let a = densify(op);
        let eig = a.symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        return Ok(svd_from_eigenpairs(&values, &eig.eigenvectors, r));
    }
    let pairs = lanczos::lanczos(op, Target::TopMagnitude(r), true, cfg.tol, cfg.max_iter)?;
    let vectors = pairs.vectors.expect("vectors requested");
    Ok(svd_from_eigenpairs(&pairs.values, &vectors, r))
}

/// Top-`r` singular triplets of a symmetric matrix.
pub fn truncated_svd(a: &DMatrix<f64>, r: usize, cfg: &LinalgConfig) -> Result<TruncatedSvd> {
    let n = check_square_symmetric(a)?;
    let max_asym = (a - a.transpose()).abs().max();
    if max_asym > 1e-12 {
        return Err(Error::InvalidParameter(format!("matrix is not symmetric (max dev {max_asym:.3e})")));
    }
    let _ = n;
    truncated_svd_op(&DenseSym(a), r, cfg)
}

/// min over orthogonal W of ||X - Y W||_F, closed form via the SVD of Y^T X.
pub fn procrustes_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch { left: x.nrows(), right: y.nrows() });
    }
    let m = y.transpose() * x;
    let svd = m.svd(false, false);
    let trace: f64 = svd.singular_values.iter().sum();
    let d2 = x.norm_squared() + y.norm_squared() - 2.0 * trace;
    Ok(d2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn small_cfg() -> LinalgConfig {
        // force the iterative path on small matrices
        LinalgConfig { dense_crossover: 4, ..Default::default() }
    }

    #[test]
    fn zero_matrix_norm() {
        let a = DMatrix::zeros(5, 5);
        assert_eq!(spectral_norm(&a, &LinalgConfig::default()).unwrap(), 0.0);
        assert_eq!(spectral_norm(&a, &small_cfg()).unwrap(), 0.0);
    }

    #[test]
    fn complete_graph_norm() {
        // adjacency of K_n has top eigenvalue n - 1
        let n = 12;
        let mut a = DMatrix::from_element(n, n, 1.0);
        for i in 0..n {
            a[(i, i)] = 0.0;
        }
        assert_abs_diff_eq!(spectral_norm(&a, &LinalgConfig::default()).unwrap(), (n - 1) as f64, epsilon = 1e-9);
        assert_abs_diff_eq!(spectral_norm(&a, &small_cfg()).unwrap(), (n - 1) as f64, epsilon = 1e-7);
    }

    #[test]
    fn two_block_constant_matrix_norm() {
        // rank-2 block-constant matrix: blocks of size 4 with value c on one
        // block and d on the other, zero across. Eigenvalues are 4c and 4d.
        let (c, d) = (0.7, -0.3);
        let mut a = DMatrix::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = c;
                a[(i + 4, j + 4)] = d;
            }
        }
        let dense = dense_extremes(&a);
        assert_abs_diff_eq!(dense.lambda_max, 4.0 * c, epsilon = 1e-10);
        assert_abs_diff_eq!(dense.lambda_min, 4.0 * d, epsilon = 1e-10);
        assert_abs_diff_eq!(spectral_norm(&a, &small_cfg()).unwrap(), 4.0 * c, epsilon = 1e-8);
    }

    #[test]
    fn shifted_identity_extremes() {
        let c = 2.5;
        let a = DMatrix::from_diagonal_element(6, 6, c);
        let r = extreme_eigenvalues(&a, &LinalgConfig::default()).unwrap();
        assert_abs_diff_eq!(r.lambda_max, c, epsilon = 1e-12);
        assert_abs_diff_eq!(r.lambda_min, c, epsilon = 1e-12);
        let r = extreme_eigenvalues(&a, &small_cfg()).unwrap();
        assert_abs_diff_eq!(r.lambda_max, c, epsilon = 1e-8);
        assert_abs_diff_eq!(r.lambda_min, c, epsilon = 1e-8);
    }

    #[test]
    fn lanczos_agrees_with_dense_at_n64() {
        let a = random_symmetric(64, 7);
        let dense = dense_extremes(&a);
        let iter = extreme_eigenvalues(&a, &small_cfg()).unwrap();
        assert_abs_diff_eq!(iter.lambda_max, dense.lambda_max, epsilon = 1e-7);
        assert_abs_diff_eq!(iter.lambda_min, dense.lambda_min, epsilon = 1e-7);
        assert!(iter.lambda_max >= iter.lambda_min);
    }

    #[test]
    fn dense_and_iterative_agree_at_crossover() {
        for seed in 0..3 {
            let a = random_symmetric(96, seed);
            let d = spectral_norm(&a, &LinalgConfig::default()).unwrap();
            let l = spectral_norm(&a, &small_cfg()).unwrap();
            assert_abs_diff_eq!(d, l, epsilon = 1e-6);
        }
    }

    #[test]
    fn rank_one_svd() {
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let a = &x * x.transpose();
        let s = truncated_svd(&a, 1, &LinalgConfig::default()).unwrap();
        assert_abs_diff_eq!(s.sigma[0], x.norm_squared(), epsilon = 1e-10);
        // u proportional to x, sign fixed so largest-|entry| coordinate >= 0
        let u = s.u.column(0);
        let scale = u[2] / (x[2] / x.norm());
        assert_abs_diff_eq!(scale.abs(), 1.0, epsilon = 1e-10);
        assert!(u[2] > 0.0);
    }

    #[test]
    fn svd_reconstruction_matches_tail_mass() {
        let a = random_symmetric(32, 3);
        let full = a.clone().symmetric_eigen();
        let mut mags: Vec<f64> = full.eigenvalues.iter().map(|v| v.abs()).collect();
        mags.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for r in [1, 3, 8] {
            let s = truncated_svd(&a, r, &LinalgConfig::default()).unwrap();
            let approx = &s.u * DMatrix::from_diagonal(&s.sigma) * s.v.transpose();
            let err = (&a - approx).norm();
            let tail: f64 = mags[r..].iter().map(|m| m * m).sum::<f64>().sqrt();
            assert_abs_diff_eq!(err, tail, epsilon = 1e-8);
        }
    }

    #[test]
    fn full_rank_svd_reconstructs() {
        let a = random_symmetric(10, 11);
        let s = truncated_svd(&a, 10, &LinalgConfig::default()).unwrap();
        let approx = &s.u * DMatrix::from_diagonal(&s.sigma) * s.v.transpose();
        assert!((&a - approx).norm() < 1e-9);
        // orthonormality
        let utu = s.u.transpose() * &s.u;
        assert!((utu - DMatrix::identity(10, 10)).norm() < 1e-8);
    }

    #[test]
    fn lanczos_truncated_svd_matches_dense() {
        let a = random_symmetric(80, 21);
        let cfg = small_cfg();
        let s_it = truncated_svd_op(&DenseSym(&a), 3, &cfg).unwrap();
        let s_dn = truncated_svd(&a, 3, &LinalgConfig::default()).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(s_it.sigma[k], s_dn.sigma[k], epsilon = 1e-7);
        }
    }

    #[test]
    fn procrustes_exact_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.gen_range(-1.0..1.0f64));
        // random orthogonal via QR
        let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0f64));
        let qr = g.qr();
        let w = qr.q();
        let y = &x * &w;
        // x = y * w^T, so the minimum over orthogonal alignments is 0
        assert_abs_diff_eq!(procrustes_distance(&x, &y).unwrap(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(
            procrustes_distance(&x, &y).unwrap(),
            procrustes_distance(&y, &x).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn procrustes_feasibility_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x = DMatrix::from_fn(12, 2, |_, _| rng.gen_range(-1.0..1.0f64));
            let y = DMatrix::from_fn(12, 2, |_, _| rng.gen_range(-1.0..1.0f64));
            let d = procrustes_distance(&x, &y).unwrap();
            assert!(d <= (&x - &y).norm() + 1e-10);
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn permutation_invariance_of_spectral_quantities() {
        let a = random_symmetric(24, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut perm: Vec<usize> = (0..24).collect();
        for i in (1..24).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut b = DMatrix::zeros(24, 24);
        for i in 0..24 {
            for j in 0..24 {
                b[(i, j)] = a[(perm[i], perm[j])];
            }
        }
        let cfg = LinalgConfig::default();
        assert_abs_diff_eq!(
            spectral_norm(&a, &cfg).unwrap(),
            spectral_norm(&b, &cfg).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn sparse_sym_matches_dense() {
        let op = SparseSym::new(6, vec![(0, 1, 2.0), (2, 5, -1.5), (1, 4, 0.25)]);
        let a = op.to_dense();
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let mut y = vec![0.0; 6];
        op.apply(&x, &mut y);
        let xd = DVector::from_vec(x.clone());
        let yd = &a * xd;
        for i in 0..6 {
            assert_abs_diff_eq!(y[i], yd[i], epsilon = 1e-14);
        }
    }
}
