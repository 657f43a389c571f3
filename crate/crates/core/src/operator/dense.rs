use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{OperatorError, PauliSum, StateVector};

/// Default qubit cap for materializing `2^n x 2^n` matrices.
pub const DENSE_QUBIT_CAP: usize = 12;

pub fn to_dense(h: &PauliSum) -> Result<DMatrix<Complex64>, OperatorError> {
    to_dense_capped(h, DENSE_QUBIT_CAP)
}

pub fn to_dense_capped(h: &PauliSum, cap: usize) -> Result<DMatrix<Complex64>, OperatorError> {
    if h.n_qubits() > cap {
        return Err(OperatorError::TooManyQubits { n_qubits: h.n_qubits(), cap });
    }
    let dim = h.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (c, s) in h.terms() {
        for col in 0..dim {
            let (row, factor) = s.act_on_basis(col);
            m[(row, col)] += c * factor;
        }
    }
    Ok(m)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn hermitian_eigen(m: DMatrix<Complex64>) -> DenseSpectrum {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    DenseSpectrum { values, vectors }
}

/// Lowest eigenpair by full dense diagonalization.
pub fn ground_state_dense(h: &PauliSum, cap: usize) -> Result<(f64, StateVector), OperatorError> {
    let spectrum = hermitian_eigen(to_dense_capped(h, cap)?);
    let v = spectrum.vectors.column(0).iter().copied().collect();
    Ok((spectrum.values[0], StateVector::new(h.n_qubits(), v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_and_x() {
        let i = PauliSum::from_labels([(c(1.0), "I")]).unwrap();
        assert_eq!(to_dense(&i).unwrap(), DMatrix::identity(2, 2));
        let x = PauliSum::from_labels([(c(1.0), "X")]).unwrap();
        let m = to_dense(&x).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
    }

    #[test]
    fn two_site_tfim_matrix() {
        // -Z0Z1 - X0 - X1: diagonal (-1, 1, 1, -1), -1 on single bit flips.
        let h = PauliSum::from_labels([(c(-1.0), "ZZ"), (c(-1.0), "XI"), (c(-1.0), "IX")]).unwrap();
        let m = to_dense(&h).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| m[(k, k)].re).collect();
        assert_eq!(diag, vec![-1.0, 1.0, 1.0, -1.0]);
        for r in 0..4usize {
            for col in 0..4usize {
                let expected = if (r ^ col).count_ones() == 1 { -1.0 } else if r == col { diag[r] } else { 0.0 };
                assert_eq!(m[(r, col)], c(expected));
            }
        }
        let (e0, _) = ground_state_dense(&h, DENSE_QUBIT_CAP).unwrap();
        assert!((e0 + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let h = PauliSum::identity(5, c(1.0));
        assert_eq!(
            to_dense_capped(&h, 4).unwrap_err(),
            OperatorError::TooManyQubits { n_qubits: 5, cap: 4 }
        );
    }
}
