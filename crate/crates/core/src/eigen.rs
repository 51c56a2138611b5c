//! Smallest eigenpairs of symmetric operators given only as matrix-vector
//! products.
//!
//! Small problems are densified and handed to a symmetric QR solver. Larger
//! ones use a Krylov-Schur (thick-restart Lanczos) iteration with full
//! reorthogonalization. Degenerate copies are recovered by rerunning the
//! iteration orthogonal to the pairs already found.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense symmetric matrix as an operator, mostly for tests.
impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target for `||A v - lambda v||` of every returned pair.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov subspace size before a restart.
    pub krylov_dim: usize,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_limit: usize,
    /// Blocks holding the requested lowest states are re-solved densely up
    /// to this dimension.
    pub refine_limit: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_restarts: 5000,
            krylov_dim: 48,
            dense_limit: 300,
            refine_limit: 2500,
            seed: 0x5eed_1e55,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Explicit `||A v - lambda v||` per pair.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// The `k` smallest eigenpairs of a symmetric operator.
pub fn lowest_eigenpairs<O: LinearOperator + ?Sized>(op: &O, k: usize, cfg: &SolverConfig) -> Result<EigenPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs of a dimension-{n} operator")));
    }
    if n <= cfg.dense_limit {
        return Ok(dense_lowest(op, k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut found = krylov_schur(op, k, &[], cfg, &mut rng)?;
    if k == 1 {
        return Ok(found);
    }
    // A single Krylov space holds one copy of each eigenvalue; look for
    // further copies in the orthogonal complement until none undercuts the
    // current k-th value.
    loop {
        if found.vectors.len() >= n {
            break;
        }
        let extra = krylov_schur(op, 1, &found.vectors, cfg, &mut rng)?;
        let kth = found.values[k - 1];
        found.matvecs += extra.matvecs;
        if extra.values[0] >= kth - 1e-10 * kth.abs().max(1.0) {
            break;
        }
        found.values.push(extra.values[0]);
        found.vectors.push(extra.vectors.into_iter().next().unwrap());
        found.residuals.push(extra.residuals[0]);
        sort_pairs(&mut found);
    }
    found.values.truncate(k);
    found.vectors.truncate(k);
    found.residuals.truncate(k);
    Ok(found)
}

fn sort_pairs(p: &mut EigenPairs) {
    let mut order: Vec<usize> = (0..p.values.len()).collect();
    order.sort_by(|&a, &b| p.values[a].total_cmp(&p.values[b]));
    p.values = order.iter().map(|&i| p.values[i]).collect();
    p.residuals = order.iter().map(|&i| p.residuals[i]).collect();
    let mut old: Vec<Option<Vec<f64>>> = std::mem::take(&mut p.vectors).into_iter().map(Some).collect();
    p.vectors = order.iter().map(|&i| old[i].take().unwrap()).collect();
}

/// Dense matrix of an operator, column by column.
pub fn densify<O: LinearOperator + ?Sized>(op: &O) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Full spectrum, ascending, with eigenvectors as columns.
pub fn dense_spectrum(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Oracle path: densify, diagonalize, keep the `k` smallest.
pub fn dense_lowest<O: LinearOperator + ?Sized>(op: &O, k: usize) -> EigenPairs {
    let m = densify(op);
    let n = m.nrows();
    let (values, vecs) = dense_spectrum(&m);
    let mut out = EigenPairs {
        values: values[..k].to_vec(),
        vectors: (0..k).map(|c| vecs.column(c).iter().copied().collect()).collect(),
        residuals: Vec::with_capacity(k),
        matvecs: n,
    };
    out.residuals = residuals(op, &out.values, &out.vectors);
    out
}

fn residuals<O: LinearOperator + ?Sized>(op: &O, values: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut y = vec![0.0; op.dim()];
    values
        .iter()
        .zip(vectors)
        .map(|(&lambda, v)| {
            op.apply(v, &mut y);
            y.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two passes of classical Gram-Schmidt; returns accumulated coefficients
/// against `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], deflate: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; basis.len()];
    for _ in 0..2 {
        for d in deflate {
            let c = dot(d, w);
            axpy(-c, d, w);
        }
        let coeffs: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &c) in basis.iter().zip(&coeffs) {
            axpy(-c, v, w);
        }
        for (hi, c) in h.iter_mut().zip(coeffs) {
            *hi += c;
        }
    }
    h
}

fn random_unit(n: usize, basis: &[Vec<f64>], deflate: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis, deflate);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Krylov-Schur for the `nev` smallest eigenpairs of `op` restricted to the
/// orthogonal complement of `deflate`.
fn krylov_schur<O: LinearOperator + ?Sized>(
    op: &O,
    nev: usize,
    deflate: &[Vec<f64>],
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EigenPairs> {
    let n = op.dim();
    let room = n - deflate.len();
    let m = cfg.krylov_dim.max(2 * nev + 8).min(room);
    if m <= nev {
        return Err(Error::invalid(format!(
            "Krylov space of size {m} too small for {nev} pairs"
        )));
    }
    let keep = (nev + (m - nev) / 2).min(m - 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut next = random_unit(n, &[], deflate, rng);
    let mut kept = 0;
    let mut w = vec![0.0; n];
    let mut matvecs = 0;
    let mut worst = f64::INFINITY;
    for restart in 0..=cfg.max_restarts {
        let mut beta = 0.0;
        for j in kept..m {
            basis.push(std::mem::take(&mut next));
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let h = orthogonalize(&mut w, &basis, deflate);
            for (i, &hi) in h.iter().enumerate() {
                t[(i, j)] = hi;
                t[(j, i)] = hi;
            }
            beta = norm(&w);
            let scale = h[j].abs().max(1.0);
            next = if beta > 1e-13 * scale {
                w.iter().map(|x| x / beta).collect()
            } else {
                // invariant subspace: continue with a fresh direction, if
                // there is still room for one
                beta = 0.0;
                if j + 1 < m {
                    random_unit(n, &basis, deflate, rng)
                } else {
                    Vec::new()
                }
            };
        }
        let (theta, y) = dense_spectrum(&t);
        let res: Vec<f64> = (0..m).map(|i| (beta * y[(m - 1, i)]).abs()).collect();
        worst = res[..nev].iter().copied().fold(0.0, f64::max);
        let ritz = |cols: usize| -> Vec<Vec<f64>> {
            (0..cols)
                .map(|c| {
                    let mut v = vec![0.0; n];
                    for (j, b) in basis.iter().enumerate() {
                        axpy(y[(j, c)], b, &mut v);
                    }
                    v
                })
                .collect()
        };
        if worst <= cfg.tol || beta == 0.0 && m == room {
            let vectors = ritz(nev);
            let values = theta[..nev].to_vec();
            let residuals = residuals(op, &values, &vectors);
            if residuals.iter().all(|&r| r <= cfg.tol * 10.0) {
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                    matvecs: matvecs + nev,
                });
            }
        }
        if restart == cfg.max_restarts {
            break;
        }
        basis = ritz(keep);
        if next.is_empty() {
            next = random_unit(n, &basis, deflate, rng);
        }
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
        }
        kept = keep;
    }
    Err(Error::NotConverged {
        iterations: cfg.max_restarts,
        residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn krylov_matches_closed_form() {
        let n = 800;
        let m = tridiag(n);
        let cfg = SolverConfig {
            tol: 1e-9,
            ..Default::default()
        };
        let pairs = lowest_eigenpairs(&m, 3, &cfg).unwrap();
        for (k, v) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-9, "k={k}: {v} vs {exact}");
        }
        assert!(pairs.residuals.iter().all(|&r| r <= 1e-8));
    }

    #[test]
    fn degenerate_copies_are_found() {
        // two decoupled copies of the same chain plus a shifted third
        let n = 200;
        let base = tridiag(n);
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for b in 0..3 {
            let shift = if b == 2 { 0.5 } else { 0.0 };
            for i in 0..n {
                for j in 0..n {
                    m[(b * n + i, b * n + j)] = base[(i, j)] + if i == j { shift } else { 0.0 };
                }
            }
        }
        let cfg = SolverConfig {
            dense_limit: 10,
            ..Default::default()
        };
        let pairs = lowest_eigenpairs(&m, 3, &cfg).unwrap();
        let (dense, _) = dense_spectrum(&m);
        for k in 0..3 {
            assert!((pairs.values[k] - dense[k]).abs() < 1e-9, "{:?} vs {:?}", pairs.values, &dense[..3]);
        }
        assert!((pairs.values[0] - pairs.values[1]).abs() < 1e-9);
    }

    #[test]
    fn dense_and_krylov_agree_on_small_problem() {
        let m = DMatrix::from_fn(60, 60, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { i as f64 * 0.01 } else { 0.0 });
        let d = dense_lowest(&m, 2);
        let cfg = SolverConfig {
            dense_limit: 0,
            krylov_dim: 20,
            ..Default::default()
        };
        let k = lowest_eigenpairs(&m, 2, &cfg).unwrap();
        for i in 0..2 {
            assert!((d.values[i] - k.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_requests() {
        let m = tridiag(4);
        assert!(lowest_eigenpairs(&m, 0, &SolverConfig::default()).is_err());
        assert!(lowest_eigenpairs(&m, 5, &SolverConfig::default()).is_err());
    }
}
