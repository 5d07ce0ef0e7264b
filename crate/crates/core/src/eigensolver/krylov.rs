//! Shift-invert block Krylov–Schur iteration for the lowest eigenpairs of a
//! symmetric positive definite [`Hamiltonian`].
//!
//! The operator `(H - σ)⁻¹` is applied through a sparse Cholesky factor; its
//! largest eigenvalues are the wanted low frequencies. The projected matrix is
//! formed explicitly from full (twice repeated) Gram–Schmidt coefficients,
//! which keeps the restart logic independent of the tridiagonal structure.
//! A block of start vectors lets the iteration resolve exactly degenerate
//! eigenvalues up to the block size.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, MatMut, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Hamiltonian;
use crate::error::{Error, Result};

pub(crate) struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KrylovParams {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub block: usize,
    pub max_restarts: usize,
    pub shift: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `w` against `basis` twice; returns the summed coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        let h: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &hi) in basis.iter().zip(&h) {
            axpy(-hi, v, w);
        }
        for (c, hi) in coef.iter_mut().zip(h) {
            *c += hi;
        }
    }
    coef
}

struct ShiftInvert {
    llt: Llt<usize, f64>,
}

impl ShiftInvert {
    fn new(h: &Hamiltonian, shift: f64) -> Result<Self> {
        let lower = h.lower_sparse(-shift)?;
        let llt = lower.sp_cholesky(Side::Lower).map_err(|e| Error::Solver {
            message: format!("Cholesky factorization of H - {shift} failed: {e:?}"),
            residual: f64::NAN,
        })?;
        Ok(Self { llt })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        let n = out.len();
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(out, n, 1));
    }
}

/// Fresh unit vector orthogonal to `basis`, drawn from `rng`.
fn random_orthogonal(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(basis, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Dense symmetric eigen-decomposition of the leading `m x m` block of the
/// row-major `t` (leading dimension `ld`), eigenvalues descending.
fn ritz(t: &[f64], ld: usize, m: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    let a = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (t[i * ld + j] + t[j * ld + i]));
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver {
        message: format!("projected eigenproblem failed: {e:?}"),
        residual: f64::NAN,
    })?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<f64> = (0..m).rev().map(|i| s[i]).collect();
    let vectors = Mat::<f64>::from_fn(m, m, |i, j| u[(i, m - 1 - j)]);
    Ok((values, vectors))
}

pub(crate) fn lowest_eigenpairs(h: &Hamiltonian, p: KrylovParams) -> Result<Eigenpairs> {
    faer::set_global_parallelism(Par::Seq);
    let n = h.dim();
    let k = p.k;
    let block = p.block.max(1);
    let m = (2 * k).max(k + 40).min(n.saturating_sub(block));
    if m < k + block + 1 {
        return Err(Error::Solver {
            message: format!("problem of dimension {n} too small for a Krylov space, use the dense path"),
            residual: f64::NAN,
        });
    }
    let keep = (k + (m - k) / 2).min(m - block);
    let op = ShiftInvert::new(h, p.shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let ld = m + block;
    let mut t = vec![0.0; ld * ld];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ld);
    for _ in 0..block {
        let v = random_orthogonal(&mut rng, &basis, n);
        basis.push(v);
    }
    let mut done = 0usize;
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;

    for _cycle in 0..=p.max_restarts {
        while done < m {
            let j = done;
            op.apply(&basis[j], &mut w);
            let coef = orthogonalize(&basis, &mut w);
            let len = basis.len();
            for (i, &c) in coef.iter().enumerate() {
                t[i * ld + j] = c;
                t[j * ld + i] = c;
            }
            let beta = norm(&w);
            let scale = coef[j].abs().max(1e-300);
            if beta > 1e-12 * scale {
                w.iter_mut().for_each(|x| *x /= beta);
                basis.push(w.clone());
                t[len * ld + j] = beta;
                t[j * ld + len] = beta;
            } else {
                // invariant subspace found: continue with an unrelated direction
                let v = random_orthogonal(&mut rng, &basis, n);
                basis.push(v);
            }
            done += 1;
        }

        let (theta, y) = ritz(&t, ld, m)?;

        // residual in H of every Ritz pair, from the coupling to the trailing block
        let mut h_tail = Vec::with_capacity(block);
        for r in 0..block {
            let mut hv = vec![0.0; n];
            h.apply(&basis[m + r], &mut hv);
            h_tail.push(hv);
        }
        let gram: Vec<f64> = (0..block * block)
            .map(|rs| dot(&h_tail[rs / block], &h_tail[rs % block]))
            .collect();
        let couplings = |i: usize| -> Vec<f64> {
            (0..block)
                .map(|r| (0..m).map(|c| t[(m + r) * ld + c] * y[(c, i)]).sum())
                .collect()
        };
        let mut converged = true;
        let mut worst = 0.0f64;
        let mut residuals = Vec::with_capacity(k);
        for i in 0..k {
            let c = couplings(i);
            let mut r2 = 0.0;
            for a in 0..block {
                for b in 0..block {
                    r2 += c[a] * c[b] * gram[a * block + b];
                }
            }
            let res = r2.max(0.0).sqrt() / theta[i].abs();
            let nu = 1.0 / theta[i] + p.shift;
            residuals.push(res);
            let rel = res / nu.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if !(theta[i] > 0.0) || rel > p.tol {
                converged = false;
            }
        }
        last_residual = worst;

        let combine = |count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|i| {
                    let mut u = vec![0.0; n];
                    for c in 0..m {
                        axpy(y[(c, i)], &basis[c], &mut u);
                    }
                    u
                })
                .collect()
        };

        if converged {
            let vectors = combine(k);
            let values = theta[..k].iter().map(|&th| 1.0 / th + p.shift).collect();
            return Ok(Eigenpairs {
                values,
                vectors,
                residuals,
            });
        }

        // thick restart: keep the best Ritz vectors plus the trailing block
        let mut next = combine(keep);
        let tail: Vec<Vec<f64>> = basis.drain(m..).collect();
        let tail_coupling: Vec<Vec<f64>> = (0..keep).map(couplings).collect();
        t.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..keep {
            t[i * ld + i] = theta[i];
            for r in 0..block {
                let c = tail_coupling[i][r];
                t[(keep + r) * ld + i] = c;
                t[i * ld + keep + r] = c;
            }
        }
        next.extend(tail);
        basis = next;
        done = keep;
    }

    Err(Error::Solver {
        message: format!(
            "no convergence for {k} eigenpairs after {} restarts",
            p.max_restarts
        ),
        residual: last_residual,
    })
}
