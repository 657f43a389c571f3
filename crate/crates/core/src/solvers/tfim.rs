//! Transverse-field Ising chain.

use num_complex::Complex64;

use super::SolverError;
use crate::operator::{Pauli, PauliString, PauliSum};

/// `H = -J sum_{i<L-1} Z_i Z_{i+1} - h sum_i X_i` on an open chain.
pub fn tfim_hamiltonian(l: usize, j: f64, h: f64) -> Result<PauliSum, SolverError> {
    if l == 0 {
        return Err(SolverError::InvalidParameter { name: "L", reason: "must be at least 1".into() });
    }
    let mut terms = Vec::with_capacity(2 * l);
    for i in 0..l.saturating_sub(1) {
        let s = PauliString::from_sparse(l, &[(i, Pauli::Z), (i + 1, Pauli::Z)])?;
        terms.push((Complex64::new(-j, 0.0), s));
    }
    for i in 0..l {
        terms.push((Complex64::new(-h, 0.0), PauliString::from_sparse(l, &[(i, Pauli::X)])?));
    }
    Ok(PauliSum::from_terms(l, terms)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{ground_state_dense, DENSE_QUBIT_CAP};

    fn ground(l: usize, j: f64, h: f64) -> f64 {
        ground_state_dense(&tfim_hamiltonian(l, j, h).unwrap(), DENSE_QUBIT_CAP).unwrap().0
    }

    #[test]
    fn single_spin() {
        let h = tfim_hamiltonian(1, 3.0, 1.0).unwrap();
        assert_eq!(h.to_string(), PauliSum::from_labels([(Complex64::new(-1.0, 0.0), "X")]).unwrap().to_string());
        assert!((ground(1, 3.0, 1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_bond() {
        assert!((ground(2, 1.0, 0.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_sites() {
        assert!((ground(2, 1.0, 1.0) + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_chain() {
        assert!(tfim_hamiltonian(0, 1.0, 1.0).is_err());
    }
}
