use num_complex::Complex64;

use super::{OperatorError, PauliSum};

/// Amplitudes of an `n`-qubit pure state; index bit `k` is qubit `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self, OperatorError> {
        let expected = 1usize
            .checked_shl(n_qubits as u32)
            .filter(|_| n_qubits < usize::BITS as usize)
            .ok_or(OperatorError::TooManyQubits { n_qubits, cap: usize::BITS as usize - 1 })?;
        if amplitudes.len() != expected {
            return Err(OperatorError::BadStateLength { expected, got: amplitudes.len() });
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, OperatorError> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n_qubits];
        let dim = amps.len();
        *amps
            .get_mut(index)
            .ok_or(OperatorError::BadStateLength { expected: dim, got: index })? = Complex64::new(1.0, 0.0);
        Self::new(n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, OperatorError> {
        if self.dim() != other.dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Real part of `<psi|H|psi>`.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64, OperatorError> {
        let h_psi = h.apply(self)?;
        Ok(self.inner(&h_psi)?.re)
    }
}
