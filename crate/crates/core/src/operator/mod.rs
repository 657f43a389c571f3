//! Sparse many-body operator algebra and the shared numerical kernels used
//! by every reference solver: matrix-free products, dense diagonalization,
//! Lanczos ground states and exact time evolution.

mod dense;
mod evolve;
mod fermion;
mod lanczos;
mod pauli;
mod state;

use thiserror::Error;

pub use dense::{ground_state_dense, hermitian_eigen, to_dense, to_dense_capped, DenseSpectrum, DENSE_QUBIT_CAP};
pub use evolve::{evolve_exact, evolve_exact_capped};
pub use fermion::{jordan_wigner, jordan_wigner_sum, FermionTerm, Ladder};
pub use lanczos::{ground_state, lanczos_ground_state, GroundState, LanczosOptions};
pub use pauli::{Pauli, PauliString, PauliSum, DROP_TOLERANCE, MAX_QUBITS};
pub use state::StateVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("invalid Pauli letter {0:?}")]
    InvalidLetter(char),
    #[error("Pauli string has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("fermionic mode {mode} out of range for {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("coefficient is not finite")]
    NonFiniteCoefficient,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{n_qubits} qubits exceeds the cap of {cap}")]
    TooManyQubits { n_qubits: usize, cap: usize },
    #[error("state vector must have length 2^n = {expected}, got {got}")]
    BadStateLength { expected: usize, got: usize },
    #[error("Lanczos did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Lanczos breakdown: {0}")]
    Breakdown(String),
    #[error("operator dimension must be at least 1")]
    EmptyOperator,
}
