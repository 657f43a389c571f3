use nalgebra::DVector;
use num_complex::Complex64;

use super::{hermitian_eigen, to_dense_capped, OperatorError, PauliSum, StateVector, DENSE_QUBIT_CAP};

/// `exp(-iHt)|psi0>` by dense eigen-decomposition of `H`.
pub fn evolve_exact(h: &PauliSum, psi0: &StateVector, time: f64) -> Result<StateVector, OperatorError> {
    evolve_exact_capped(h, psi0, time, DENSE_QUBIT_CAP)
}

pub fn evolve_exact_capped(
    h: &PauliSum,
    psi0: &StateVector,
    time: f64,
    cap: usize,
) -> Result<StateVector, OperatorError> {
    if psi0.n_qubits() != h.n_qubits() {
        return Err(OperatorError::DimensionMismatch { expected: h.n_qubits(), got: psi0.n_qubits() });
    }
    if time == 0.0 {
        return Ok(psi0.clone());
    }
    let spectrum = hermitian_eigen(to_dense_capped(h, cap)?);
    let v = &spectrum.vectors;
    let psi = DVector::from_column_slice(psi0.amplitudes());
    let mut coeffs = v.adjoint() * psi;
    for (c, e) in coeffs.iter_mut().zip(&spectrum.values) {
        *c *= Complex64::from_polar(1.0, -e * time);
    }
    let out = v * coeffs;
    StateVector::new(h.n_qubits(), out.iter().copied().collect())
}
