//! Symmetric eigensolvers and PCA used by the embeddings.
//!
//! Small matrices go through nalgebra's dense solver. Large ones use Lanczos
//! with full reorthogonalization from a fixed start vector, which only needs
//! the top few eigenpairs and dense mat-vec products.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Above this size the Lanczos path is taken.
pub(crate) const DENSE_LIMIT: usize = 300;

const LANCZOS_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct TopEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// One length-`n` vector per value; largest-magnitude entry positive.
    pub vectors: Vec<Vec<f64>>,
    /// `sum |negative eigenvalues| / sum |eigenvalues|`.
    pub negative_fraction: f64,
    /// True when `negative_fraction` comes from Ritz values only.
    pub negative_estimated: bool,
}

/// Top `k` eigenpairs of the symmetric row-major `n x n` matrix `a`.
pub(crate) fn top_eigenpairs(n: usize, a: &[f64], k: usize) -> TopEigen {
    assert!(k <= n && a.len() == n * n);
    if n <= DENSE_LIMIT {
        dense(n, a, k)
    } else {
        lanczos(n, a, k)
    }
}

fn negative_fraction(values: &[f64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum::<f64>() / total
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn sorted_pairs(eig: &SymmetricEigen<f64, nalgebra::Dyn>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    (values, vectors)
}

fn dense(n: usize, a: &[f64], k: usize) -> TopEigen {
    let m = DMatrix::from_row_slice(n, n, a);
    let eig = SymmetricEigen::new(m);
    let negative_fraction = negative_fraction(eig.eigenvalues.as_slice());
    let (values, vectors) = sorted_pairs(&eig, k);
    TopEigen {
        values,
        vectors,
        negative_fraction,
        negative_estimated: false,
    }
}

fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    a.par_chunks(n)
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Removes the components along `basis` (two passes for stability).
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn lanczos(n: usize, a: &[f64], k: usize) -> TopEigen {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            orthogonalize(&mut v, basis);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE) * n as f64;
    let mut steps = (4 * k + 40).min(n);
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new(); // beta[j] couples q[j] and q[j + 1]
    let mut current = random_unit(&q).expect("n > 0");

    loop {
        while q.len() < steps {
            q.push(current.clone());
            let mut w = matvec(n, a, &current);
            let al = dot(&w, &current);
            alpha.push(al);
            orthogonalize(&mut w, &q);
            let b = norm(&w);
            if q.len() == n {
                break;
            }
            if b <= 1e-12 * scale {
                // Invariant subspace found: continue in a fresh direction.
                match random_unit(&q) {
                    Some(v) => {
                        beta.push(0.0);
                        current = v;
                    }
                    None => break,
                }
            } else {
                beta.push(b);
                current = w.iter().map(|x| x / b).collect();
            }
        }

        let m = q.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let tail = beta.get(m - 1).copied().unwrap_or(0.0);
        let converged = m == n
            || order[..k]
                .iter()
                .all(|&i| (tail * eig.eigenvectors[(m - 1, i)]).abs() <= LANCZOS_TOL * scale);
        if converged || m == n {
            let mut values = Vec::with_capacity(k);
            let mut vectors = Vec::with_capacity(k);
            for &i in &order[..k] {
                let y = eig.eigenvectors.column(i);
                let mut v = vec![0.0; n];
                for (j, qj) in q.iter().enumerate() {
                    v.iter_mut().zip(qj).for_each(|(x, qv)| *x += y[j] * qv);
                }
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                fix_sign(&mut v);
                values.push(eig.eigenvalues[i]);
                vectors.push(v);
            }
            return TopEigen {
                values,
                vectors,
                negative_fraction: negative_fraction(eig.eigenvalues.as_slice()),
                negative_estimated: m < n,
            };
        }
        steps = (steps * 2).min(n);
    }
}

/// Rotates centered `n x d` row-major coordinates onto their principal axes
/// (descending variance), with the usual sign convention per axis.
pub(crate) fn pca_align(n: usize, d: usize, coords: &mut [f64]) {
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in coords.chunks_exact(d) {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += row[i] * row[j];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let (_, axes) = sorted_pairs(&eig, d);
    let mut out = vec![0.0; n * d];
    for (r, row) in coords.chunks_exact(d).enumerate() {
        for (c, axis) in axes.iter().enumerate() {
            out[r * d + c] = dot(row, axis);
        }
    }
    // Axis signs follow the projected coordinates, not the loadings.
    for c in 0..d {
        let mut col: Vec<f64> = (0..n).map(|r| out[r * d + c]).collect();
        fix_sign(&mut col);
        for r in 0..n {
            out[r * d + c] = col[r];
        }
    }
    coords.copy_from_slice(&out);
}

/// Subtracts the column means in place.
pub(crate) fn center(d: usize, coords: &mut [f64]) {
    let n = coords.len() / d;
    if n == 0 {
        return;
    }
    let mut mean = vec![0.0; d];
    for row in coords.chunks_exact(d) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in coords.chunks_exact_mut(d) {
        row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
    }
}
