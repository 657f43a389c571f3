//! Full configuration interaction in the Slater-determinant basis.
//!
//! Spin orbitals are laid out in two blocks: alpha orbital `p` is bit `p` and
//! beta orbital `p` is bit `n + p` of a determinant's occupation mask.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{IntegralSet, SolverError};
use crate::operator::{jordan_wigner_sum, FermionTerm, Ladder, PauliSum};

/// Largest determinant space diagonalized densely.
pub const FCI_DETERMINANT_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct FciResult {
    pub energy: f64,
    /// Diagonal energy of the determinant filling the lowest orbitals.
    pub reference_determinant_energy: f64,
    pub n_determinants: usize,
    pub wall_time_s: f64,
}

/// Alpha and beta electron counts implied by `n_electrons` and `ms2`.
pub fn spin_counts(ints: &IntegralSet) -> Result<(usize, usize), SolverError> {
    let n = ints.n_electrons() as i64;
    let ms2 = ints.ms2();
    if (n + ms2) % 2 != 0 || ms2.abs() > n {
        return Err(SolverError::SectorEmpty);
    }
    let (na, nb) = (((n + ms2) / 2) as usize, ((n - ms2) / 2) as usize);
    if na > ints.n_orbitals() || nb > ints.n_orbitals() {
        return Err(SolverError::SectorEmpty);
    }
    Ok((na, nb))
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    (0u64..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

fn annihilate(det: u64, mode: usize) -> Option<(u64, f64)> {
    if det >> mode & 1 == 0 {
        return None;
    }
    let sign = if (det & ((1 << mode) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((det & !(1 << mode), sign))
}

fn create(det: u64, mode: usize) -> Option<(u64, f64)> {
    if det >> mode & 1 == 1 {
        return None;
    }
    let sign = if (det & ((1 << mode) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((det | (1 << mode), sign))
}

/// Applies `a†_P a†_R a_S a_Q` (rightmost first), or `a†_P a_Q` when `pair` is `None`.
fn excite(det: u64, p: usize, q: usize, pair: Option<(usize, usize)>) -> Option<(u64, f64)> {
    let (d, s1) = annihilate(det, q)?;
    let (d, s2, s3) = match pair {
        Some((r, s)) => {
            let (d, s2) = annihilate(d, s)?;
            let (d, s3) = create(d, r)?;
            (d, s2, s3)
        }
        None => (d, 1.0, 1.0),
    };
    let (d, s4) = create(d, p)?;
    Some((d, s1 * s2 * s3 * s4))
}

/// Hamiltonian matrix over the `(n_alpha, n_beta)` determinant space.
pub fn fci_matrix(ints: &IntegralSet) -> Result<(Vec<u64>, DMatrix<f64>), SolverError> {
    let n = ints.n_orbitals();
    let (na, nb) = spin_counts(ints)?;
    let dets: Vec<u64> = combinations(n, nb)
        .into_iter()
        .flat_map(|beta| combinations(n, na).into_iter().map(move |alpha| alpha | (beta << n)))
        .collect();
    if dets.len() > FCI_DETERMINANT_CAP {
        return Err(SolverError::CapExceeded { size: dets.len(), cap: FCI_DETERMINANT_CAP });
    }
    let index: HashMap<u64, usize> = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let dim = dets.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (col, &det) in dets.iter().enumerate() {
        h[(col, col)] += ints.core_energy();
        for spin in [0, n] {
            for p in 0..n {
                for q in 0..n {
                    let v = ints.h(p, q);
                    if v == 0.0 {
                        continue;
                    }
                    if let Some((d, sign)) = excite(det, p + spin, q + spin, None) {
                        h[(index[&d], col)] += sign * v;
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = ints.eri(p, q, r, s);
                        if v == 0.0 {
                            continue;
                        }
                        for sigma in [0, n] {
                            for tau in [0, n] {
                                let pair = Some((r + tau, s + tau));
                                if let Some((d, sign)) = excite(det, p + sigma, q + sigma, pair) {
                                    h[(index[&d], col)] += 0.5 * sign * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((dets, h))
}

pub fn fci_ground_state(ints: &IntegralSet) -> Result<FciResult, SolverError> {
    let start = Instant::now();
    let n = ints.n_orbitals();
    let (na, nb) = spin_counts(ints)?;
    let (dets, h) = fci_matrix(ints)?;
    let reference = ((1u64 << na) - 1) | (((1u64 << nb) - 1) << n);
    let reference_index = dets.iter().position(|&d| d == reference).expect("reference determinant is in the sector");
    let reference_determinant_energy = h[(reference_index, reference_index)];
    let energy = h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !energy.is_finite() {
        return Err(SolverError::NonFinite("FCI energy"));
    }
    Ok(FciResult {
        energy,
        reference_determinant_energy,
        n_determinants: dets.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Second-quantized molecular Hamiltonian mapped to qubits, same spin-orbital layout.
pub fn molecular_hamiltonian(ints: &IntegralSet) -> Result<PauliSum, SolverError> {
    let n = ints.n_orbitals();
    let mut terms = vec![FermionTerm::constant(Complex64::new(ints.core_energy(), 0.0))];
    for spin in [0, n] {
        for p in 0..n {
            for q in 0..n {
                if ints.h(p, q) != 0.0 {
                    terms.push(FermionTerm::hopping(ints.h(p, q), p + spin, q + spin));
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let v = ints.eri(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for sigma in [0, n] {
                        for tau in [0, n] {
                            terms.push(FermionTerm::new(
                                Complex64::new(0.5 * v, 0.0),
                                vec![
                                    Ladder::create(p + sigma),
                                    Ladder::create(r + tau),
                                    Ladder::annihilate(s + tau),
                                    Ladder::annihilate(q + sigma),
                                ],
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(jordan_wigner_sum(&terms, 2 * n)?)
}
