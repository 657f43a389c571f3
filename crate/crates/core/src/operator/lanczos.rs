//! Hermitian Lanczos for the lowest eigenpair of a matrix-free operator.
//!
//! Full reorthogonalization (two Gram-Schmidt passes) against every stored
//! Krylov vector, and a seeded random start, so results are reproducible
//! bit-for-bit for a fixed seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OperatorError, PauliSum, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Required residual `||Hv - Ev|| <= tol * max(1, |E|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Number of eigenvalues of the symmetric tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] / d };
        d = alpha[i] - x - off;
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn lowest_tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    let radius = |i: usize| {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { beta[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| alpha[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| alpha[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn lowest_tridiagonal_eigenvector(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let n = alpha.len();
    let t = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let k = (0..n)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("non-empty tridiagonal");
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

/// Lowest eigenpair of the Hermitian operator `matvec` of dimension `dim`.
///
/// `matvec(x, y)` must overwrite `y` with `A x`. When `support` is given the
/// random start vector is zeroed outside it; for an operator that preserves
/// that subspace the search stays inside it.
pub fn lanczos_ground_state<F>(
    matvec: F,
    dim: usize,
    opts: &LanczosOptions,
    support: Option<&dyn Fn(usize) -> bool>,
) -> Result<GroundState, OperatorError>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if dim == 0 {
        return Err(OperatorError::EmptyOperator);
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Complex64> = (0..dim)
        .map(|i| {
            let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            match support {
                Some(inside) if !inside(i) => zero,
                _ => z,
            }
        })
        .collect();
    let n0 = norm(&q);
    if n0 == 0.0 {
        return Err(OperatorError::Breakdown("start vector has no support".into()));
    }
    q.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<Complex64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![zero; dim];
    let mut prev_theta = f64::INFINITY;
    let mut last_residual = f64::INFINITY;

    for j in 0..opts.max_iter {
        w.iter_mut().for_each(|x| *x = zero);
        matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        if !a.is_finite() {
            return Err(OperatorError::Breakdown(format!("non-finite diagonal element at step {j}")));
        }
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= qi * a;
        }
        if j > 0 {
            let b_prev = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= qi * b_prev;
            }
        }
        for _ in 0..2 {
            for v in &basis {
                let overlap = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * overlap;
                }
            }
        }
        let b = norm(&w);
        if !b.is_finite() {
            return Err(OperatorError::Breakdown(format!("non-finite off-diagonal element at step {j}")));
        }
        alpha.push(a);

        let theta = lowest_tridiagonal_eigenvalue(&alpha, &beta);
        let scale = theta.abs().max(1.0);
        let exhausted = j + 1 == dim || b <= 1e-13 * scale;
        let stagnant = (theta - prev_theta).abs() <= 1e-3 * opts.tol * scale;
        prev_theta = theta;

        if exhausted || stagnant || (j + 1) % 8 == 0 {
            let (_, s) = lowest_tridiagonal_eigenvector(&alpha, &beta);
            last_residual = b * s.last().copied().unwrap_or(0.0).abs();
            if exhausted || last_residual <= 0.5 * opts.tol * scale {
                let mut v = vec![zero; dim];
                for (coef, qk) in s.iter().zip(&basis) {
                    for (vi, qi) in v.iter_mut().zip(qk) {
                        *vi += qi * *coef;
                    }
                }
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let mut hv = vec![zero; dim];
                matvec(&v, &mut hv);
                let energy = dot(&v, &hv).re;
                let residual = hv
                    .iter()
                    .zip(&v)
                    .map(|(h, x)| (h - x * energy).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                last_residual = residual;
                if residual <= opts.tol * energy.abs().max(1.0) {
                    return Ok(GroundState { energy, vector: v, iterations: j + 1, residual });
                }
                if exhausted {
                    return Err(OperatorError::NonConvergence { iterations: j + 1, residual });
                }
            }
        }

        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
    Err(OperatorError::NonConvergence { iterations: opts.max_iter, residual: last_residual })
}

/// Lowest eigenpair of a [`PauliSum`] through the matrix-free product.
pub fn ground_state(
    h: &PauliSum,
    opts: &LanczosOptions,
) -> Result<(f64, StateVector, GroundState), OperatorError> {
    let gs = lanczos_ground_state(
        |x, y| h.apply_into(x, y).expect("dimensions fixed by construction"),
        h.dim(),
        opts,
        None,
    )?;
    let state = StateVector::new(h.n_qubits(), gs.vector.clone())?;
    Ok((gs.energy, state, gs))
}
