//! Lanczos iteration with full reorthogonalization for symmetric operators.
//!
//! Converges Ritz pairs at both ends of the spectrum; used for spectral
//! norms, extreme eigenvalues and truncated eigendecompositions of matrices
//! too large for a dense solve. The starting vector is derived
//! deterministically from the operator's structural seed so repeated runs
//! are bit-identical.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SymOp;
use crate::error::{Error, Result};

const BREAKDOWN_TOL: f64 = 1e-13;

pub struct RitzPairs {
    /// Eigenvalue estimates, sorted descending.
    pub values: Vec<f64>,
    /// Matching Ritz vectors (columns), present when requested.
    pub vectors: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

/// Which Ritz values must be converged before stopping.
#[derive(Clone, Copy)]
pub enum Target {
    /// The largest and smallest eigenvalue.
    BothEnds,
    /// The `r` eigenvalues of largest magnitude.
    TopMagnitude(usize),
}

pub fn lanczos(
    op: &dyn SymOp,
    target: Target,
    want_vectors: bool,
    tol: f64,
    max_iter: usize,
) -> Result<RitzPairs> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("operator dimension is zero".into()));
    }
    let max_iter = max_iter.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(op.op_seed());

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // beta[k] couples q_k and q_{k+1}

    let mut q = random_unit(&mut rng, n);
    let mut q_prev: Vec<f64> = vec![0.0; n];
    let mut exhausted = false;

    let mut best: Option<RitzPairs> = None;
    let mut best_residual = f64::INFINITY;

    let mut w = vec![0.0; n];
    loop {
        basis.push(q.clone());
        let m = basis.len();

        op.apply(&q, &mut w);
        let alpha = dot(&q, &w);
        alphas.push(alpha);
        for i in 0..n {
            w[i] -= alpha * q[i];
            if m >= 2 {
                w[i] -= betas[m - 2] * q_prev[i];
            }
        }
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for i in 0..n {
                    w[i] -= c * b[i];
                }
            }
        }
        let mut beta = norm(&w);
        if beta < BREAKDOWN_TOL {
            // invariant subspace reached; continue in a fresh direction
            match fresh_direction(&mut rng, &basis, n) {
                Some(v) => {
                    w = v;
                    beta = 0.0;
                }
                None => exhausted = true,
            }
        } else {
            for x in &mut w {
                *x /= beta;
            }
        }

        let done_iterating = exhausted || m >= max_iter;
        let check_now = done_iterating || m >= check_floor(target) && m % 10 == 0;
        if check_now {
            let last_beta = if exhausted { 0.0 } else { beta };
            let (pairs, resid) = extract(&alphas, &betas, last_beta, &basis, target, want_vectors, m)?;
            let scale = pairs.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if resid < best_residual {
                best_residual = resid;
                best = Some(pairs);
            }
            if resid <= tol * scale || exhausted || m >= n {
                return Ok(best.unwrap());
            }
            if m >= max_iter {
                return Err(Error::NonConvergence { iterations: m, residual: best_residual });
            }
        }

        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w.clone());
    }
}

fn check_floor(target: Target) -> usize {
    match target {
        Target::BothEnds => 20,
        Target::TopMagnitude(r) => (2 * r + 10).max(20),
    }
}

/// Solve the tridiagonal eigenproblem and pull out the targeted Ritz pairs.
fn extract(
    alphas: &[f64],
    betas: &[f64],
    last_beta: f64,
    basis: &[Vec<f64>],
    target: Target,
    want_vectors: bool,
    iterations: usize,
) -> Result<(RitzPairs, f64)> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = alphas[k];
        if k + 1 < m {
            t[(k, k + 1)] = betas[k];
            t[(k + 1, k)] = betas[k];
        }
    }
    let eig = t.symmetric_eigen();

    // sort indices by eigenvalue descending
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let chosen: Vec<usize> = match target {
        Target::BothEnds => {
            if m == 1 {
                vec![order[0]]
            } else {
                vec![order[0], order[m - 1]]
            }
        }
        Target::TopMagnitude(r) => {
            let mut by_mag = order.clone();
            by_mag.sort_by(|&a, &b| {
                eig.eigenvalues[b]
                    .abs()
                    .partial_cmp(&eig.eigenvalues[a].abs())
                    .unwrap()
            });
            let mut sel: Vec<usize> = by_mag.into_iter().take(r.min(m)).collect();
            sel.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
            sel
        }
    };

    // Ritz residual bound: |beta_m * s_{m,i}|
    let mut worst = 0.0f64;
    for &idx in &chosen {
        let r = (last_beta * eig.eigenvectors[(m - 1, idx)]).abs();
        worst = worst.max(r);
    }

    let values: Vec<f64> = chosen.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = if want_vectors {
        let n = basis[0].len();
        let mut v = DMatrix::zeros(n, chosen.len());
        for (col, &idx) in chosen.iter().enumerate() {
            let s = eig.eigenvectors.column(idx);
            let mut y = DVector::zeros(n);
            for (k, b) in basis.iter().enumerate() {
                let c = s[k];
                for i in 0..n {
                    y[i] += c * b[i];
                }
            }
            let nrm = y.norm();
            if nrm > 0.0 {
                y /= nrm;
            }
            v.set_column(col, &y);
        }
        Some(v)
    } else {
        None
    };

    Ok((
        RitzPairs { values, vectors, iterations, residual: worst },
        worst,
    ))
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nrm = norm(&v);
    for x in &mut v {
        *x /= nrm;
    }
    v
}

fn fresh_direction(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    if basis.len() >= n {
        return None;
    }
    for _ in 0..8 {
        let mut v = random_unit(rng, n);
        for b in basis {
            let c = dot(b, &v);
            for i in 0..n {
                v[i] -= c * b[i];
            }
        }
        let nrm = norm(&v);
        if nrm > 1e-8 {
            for x in &mut v {
                *x /= nrm;
            }
            return Some(v);
        }
    }
    None
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
