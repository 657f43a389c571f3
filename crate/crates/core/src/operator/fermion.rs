//! Fermionic ladder-operator products and their Jordan-Wigner images.
//!
//! Mode `j` maps to qubit `j` with a parity string on all lower modes:
//! `a_j = Z_0 ... Z_{j-1} (X_j + i Y_j) / 2`, so an occupied mode is the
//! `|1>` (Z = -1) state.

use num_complex::Complex64;

use super::{OperatorError, Pauli, PauliString, PauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }
}

/// `coefficient * l_1 l_2 ... l_k`, operators applied right to left.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coefficient: Complex64,
    pub ladder: Vec<Ladder>,
}

impl FermionTerm {
    pub fn new(coefficient: Complex64, ladder: Vec<Ladder>) -> Self {
        Self { coefficient, ladder }
    }

    pub fn constant(coefficient: Complex64) -> Self {
        Self { coefficient, ladder: Vec::new() }
    }

    /// `c * a†_p a_q`.
    pub fn hopping(coefficient: f64, p: usize, q: usize) -> Self {
        Self::new(
            Complex64::new(coefficient, 0.0),
            vec![Ladder::create(p), Ladder::annihilate(q)],
        )
    }

    /// `c * n_p = c * a†_p a_p`.
    pub fn number(coefficient: f64, p: usize) -> Self {
        Self::hopping(coefficient, p, p)
    }
}

fn ladder_image(op: Ladder, n_modes: usize) -> Result<PauliSum, OperatorError> {
    if op.mode >= n_modes {
        return Err(OperatorError::ModeOutOfRange { mode: op.mode, n_modes });
    }
    let mut letters = vec![Pauli::I; n_modes];
    letters[..op.mode].fill(Pauli::Z);
    letters[op.mode] = Pauli::X;
    let x = PauliString::new(letters.clone())?;
    letters[op.mode] = Pauli::Y;
    let y = PauliString::new(letters)?;
    let y_coeff = if op.dagger { Complex64::new(0.0, -0.5) } else { Complex64::new(0.0, 0.5) };
    PauliSum::from_terms(n_modes, [(Complex64::new(0.5, 0.0), x), (y_coeff, y)])
}

pub fn jordan_wigner(term: &FermionTerm, n_modes: usize) -> Result<PauliSum, OperatorError> {
    let mut acc = PauliSum::identity(n_modes, term.coefficient);
    for op in &term.ladder {
        acc = acc.try_mul(&ladder_image(*op, n_modes)?)?;
    }
    Ok(acc)
}

/// Linear extension of [`jordan_wigner`] over a sum of terms.
pub fn jordan_wigner_sum<'a>(
    terms: impl IntoIterator<Item = &'a FermionTerm>,
    n_modes: usize,
) -> Result<PauliSum, OperatorError> {
    let mut acc = PauliSum::zero(n_modes);
    for t in terms {
        acc = acc.try_add(&jordan_wigner(t, n_modes)?)?;
    }
    Ok(acc)
}
