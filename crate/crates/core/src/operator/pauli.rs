//! Pauli strings and sparse weighted sums of them.
//!
//! Qubit `k` corresponds to bit `k` of a computational-basis index, and a set
//! bit is the `Z = -1` eigenstate. Every Hamiltonian in the crate is a
//! [`PauliSum`]; the matrix-free product [`PauliSum::apply`] never builds the
//! `2^n x 2^n` matrix.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;

use super::{OperatorError, StateVector};

/// Coefficients below this magnitude are dropped by [`PauliSum::canonicalize`].
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Largest register a bit-mask representation supports.
pub const MAX_QUBITS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit product `self * other` as `(phase, letter)`.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (a, b) if a == b => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = OperatorError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(OperatorError::InvalidLetter(other)),
        }
    }
}

/// Tensor product of single-qubit Paulis, one letter per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self, OperatorError> {
        if letters.len() > MAX_QUBITS {
            return Err(OperatorError::TooManyQubits { n_qubits: letters.len(), cap: MAX_QUBITS });
        }
        let mut x_mask = 0u64;
        let mut z_mask = 0u64;
        for (k, p) in letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= 1 << k,
                Pauli::Y => {
                    x_mask |= 1 << k;
                    z_mask |= 1 << k;
                }
                Pauli::Z => z_mask |= 1 << k,
            }
        }
        Ok(Self { letters, x_mask, z_mask })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(vec![Pauli::I; n_qubits]).expect("identity string within mask width")
    }

    /// String with the given letters at the given qubits and identity elsewhere.
    pub fn from_sparse(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self, OperatorError> {
        let mut letters = vec![Pauli::I; n_qubits];
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(OperatorError::QubitOutOfRange { qubit: q, n_qubits });
            }
            letters[q] = p;
        }
        Self::new(letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    /// `i^(number of Y letters)`: the phase picked up by `P|b>` beyond the Z signs.
    fn y_phase(&self) -> Complex64 {
        match (self.x_mask & self.z_mask).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Image of basis state `b`: `P|b> = factor * |b'>`, returned as `(b', factor)`.
    pub fn act_on_basis(&self, b: usize) -> (usize, Complex64) {
        let sign = if ((b as u64) & self.z_mask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        ((b as u64 ^ self.x_mask) as usize, self.y_phase() * sign)
    }

    pub fn mul(&self, other: &PauliString) -> Result<(Complex64, PauliString), OperatorError> {
        if self.len() != other.len() {
            return Err(OperatorError::LengthMismatch { expected: self.len(), got: other.len() });
        }
        let mut phase = Complex64::new(1.0, 0.0);
        let letters = self
            .letters
            .iter()
            .zip(&other.letters)
            .map(|(a, b)| {
                let (p, l) = a.mul(*b);
                phase *= p;
                l
            })
            .collect();
        Ok((phase, PauliString::new(letters)?))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters.cmp(&other.letters)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = OperatorError;

    /// Parses a dense letter string such as `"XIZ"`; character `k` acts on qubit `k`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s.chars().map(Pauli::try_from).collect::<Result<Vec<_>, _>>()?;
        PauliString::new(letters)
    }
}

/// Weighted sum of Pauli strings on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn identity(n_qubits: usize, coeff: Complex64) -> Self {
        Self::from_terms(n_qubits, [(coeff, PauliString::identity(n_qubits))])
            .expect("identity term is well formed")
    }

    /// Builds a canonical sum, rejecting strings of the wrong length and non-finite weights.
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (Complex64, PauliString)>,
    ) -> Result<Self, OperatorError> {
        if n_qubits > MAX_QUBITS {
            return Err(OperatorError::TooManyQubits { n_qubits, cap: MAX_QUBITS });
        }
        let mut out = Vec::new();
        for (c, s) in terms {
            if s.len() != n_qubits {
                return Err(OperatorError::LengthMismatch { expected: n_qubits, got: s.len() });
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(OperatorError::NonFiniteCoefficient);
            }
            out.push((c, s));
        }
        Ok(Self { n_qubits, terms: out }.canonicalize())
    }

    /// Convenience: a single real-weighted term given as `(qubit, letter)` pairs.
    pub fn term(n_qubits: usize, coeff: f64, ops: &[(usize, Pauli)]) -> Result<Self, OperatorError> {
        let s = PauliString::from_sparse(n_qubits, ops)?;
        Self::from_terms(n_qubits, [(Complex64::new(coeff, 0.0), s)])
    }

    /// Parses `[(coeff, "XZI"), ...]` pairs; every string must have the same length.
    pub fn from_labels<'a>(
        terms: impl IntoIterator<Item = (Complex64, &'a str)>,
    ) -> Result<Self, OperatorError> {
        let parsed = terms
            .into_iter()
            .map(|(c, s)| Ok((c, s.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>, OperatorError>>()?;
        let n = parsed.first().map(|(_, s)| s.len()).unwrap_or(0);
        Self::from_terms(n, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sorts terms lexicographically by letters, merges duplicates and drops
    /// coefficients with modulus below [`DROP_TOLERANCE`].
    pub fn canonicalize(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut merged: Vec<(Complex64, PauliString)> = Vec::with_capacity(self.terms.len());
        for (c, s) in self.terms.drain(..) {
            match merged.last_mut() {
                Some((acc, last)) if *last == s => *acc += c,
                _ => merged.push((c, s)),
            }
        }
        merged.retain(|(c, _)| c.norm() >= DROP_TOLERANCE);
        self.terms = merged;
        self
    }

    /// True when every coefficient is real, i.e. the sum is Hermitian.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.iter().all(|(c, _)| c.im.abs() <= tol)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let terms = self.terms.iter().map(|(c, s)| (c * factor, s.clone()));
        Self { n_qubits: self.n_qubits, terms: terms.collect() }.canonicalize()
    }

    pub fn try_add(&self, other: &PauliSum) -> Result<Self, OperatorError> {
        if self.n_qubits != other.n_qubits {
            return Err(OperatorError::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Ok(Self { n_qubits: self.n_qubits, terms }.canonicalize())
    }

    pub fn try_mul(&self, other: &PauliSum) -> Result<Self, OperatorError> {
        if self.n_qubits != other.n_qubits {
            return Err(OperatorError::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ca, sa) in &self.terms {
            for (cb, sb) in &other.terms {
                let (phase, s) = sa.mul(sb)?;
                terms.push((ca * cb * phase, s));
            }
        }
        Ok(Self { n_qubits: self.n_qubits, terms }.canonicalize())
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        let terms = self.terms.iter().map(|(c, s)| (c.conj(), s.clone()));
        Self { n_qubits: self.n_qubits, terms: terms.collect() }
    }

    /// `y += H x` on raw amplitude slices of length `2^n`.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<(), OperatorError> {
        let dim = self.dim();
        if x.len() != dim || y.len() != dim {
            return Err(OperatorError::DimensionMismatch { expected: dim, got: x.len().min(y.len()) });
        }
        for (c, s) in &self.terms {
            let phase = c * s.y_phase();
            let (xm, zm) = (s.x_mask as usize, s.z_mask as usize);
            for (b, amp) in x.iter().enumerate() {
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let v = phase * amp;
                if (b & zm).count_ones() % 2 == 1 {
                    y[b ^ xm] -= v;
                } else {
                    y[b ^ xm] += v;
                }
            }
        }
        Ok(())
    }

    /// Matrix-free `H|psi>`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector, OperatorError> {
        if psi.n_qubits() != self.n_qubits {
            return Err(OperatorError::DimensionMismatch {
                expected: self.n_qubits,
                got: psi.n_qubits(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(psi.amplitudes(), &mut out)?;
        StateVector::new(self.n_qubits, out)
    }

    /// Diagonal matrix elements `<b|H|b>` for every basis state.
    pub fn diagonal(&self) -> Vec<Complex64> {
        let mut diag = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (c, s) in self.terms.iter().filter(|(_, s)| s.is_diagonal()) {
            let zm = s.z_mask as usize;
            for (b, d) in diag.iter_mut().enumerate() {
                if (b & zm).count_ones() % 2 == 1 {
                    *d -= c;
                } else {
                    *d += c;
                }
            }
        }
        diag
    }

    /// True when no term flips a bit.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.is_diagonal())
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, s)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{}*{}", c.re, s)?;
            } else {
                write!(f, "({}{:+}i)*{}", c.re, c.im, s)?;
            }
        }
        Ok(())
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;

    fn add(self, rhs: &PauliSum) -> PauliSum {
        self.try_add(rhs).expect("PauliSum addition requires equal register sizes")
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;

    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self + &rhs.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;

    fn neg(self) -> PauliSum {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;

    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.try_mul(rhs).expect("PauliSum product requires equal register sizes")
    }
}

impl Mul<f64> for &PauliSum {
    type Output = PauliSum;

    fn mul(self, rhs: f64) -> PauliSum {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pauli_algebra_closes() {
        let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for a in letters {
            for b in letters {
                let (p1, ab) = a.mul(b);
                let (p2, ba) = b.mul(a);
                assert_eq!(ab, ba);
                // Paulis either commute or anticommute.
                assert!((p1 - p2).norm() < 1e-15 || (p1 + p2).norm() < 1e-15);
            }
        }
        assert_eq!(Pauli::X.mul(Pauli::Y), (Complex64::i(), Pauli::Z));
    }

    #[test]
    fn canonicalize_sorts_merges_and_drops() {
        let h = PauliSum::from_labels([
            (c(1.0), "ZI"),
            (c(0.5), "XX"),
            (c(-1.0), "ZI"),
            (c(1e-16), "YY"),
            (c(2.0), "IX"),
        ])
        .unwrap();
        let labels: Vec<String> = h.terms().iter().map(|(_, s)| s.to_string()).collect();
        assert_eq!(labels, vec!["IX", "XX"]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!("XQ".parse::<PauliString>(), Err(OperatorError::InvalidLetter('Q'))));
        let s = PauliString::identity(2);
        assert!(matches!(
            PauliSum::from_terms(3, [(c(1.0), s.clone())]),
            Err(OperatorError::LengthMismatch { .. })
        ));
        assert!(matches!(
            PauliSum::from_terms(2, [(c(f64::NAN), s)]),
            Err(OperatorError::NonFiniteCoefficient)
        ));
    }

    #[test]
    fn apply_basis_examples() {
        let z = PauliSum::from_labels([(c(1.0), "Z")]).unwrap();
        let x = PauliSum::from_labels([(c(1.0), "X")]).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        assert_eq!(z.apply(&zero).unwrap(), zero);
        assert_eq!(x.apply(&zero).unwrap(), StateVector::basis(1, 1).unwrap());

        // |01>: qubit 0 in |1>, qubit 1 in |0>.
        let zz = PauliSum::from_labels([(c(1.0), "ZZ")]).unwrap();
        let psi = StateVector::basis(2, 0b01).unwrap();
        let out = zz.apply(&psi).unwrap();
        assert_eq!(out.amplitudes()[0b01], c(-1.0));
        assert_eq!(out.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let z = PauliSum::from_labels([(c(1.0), "ZI")]).unwrap();
        let psi = StateVector::basis(1, 0).unwrap();
        assert!(matches!(z.apply(&psi), Err(OperatorError::DimensionMismatch { .. })));
    }

    #[test]
    fn product_of_sums() {
        let x = PauliSum::from_labels([(c(1.0), "X")]).unwrap();
        let y = PauliSum::from_labels([(c(1.0), "Y")]).unwrap();
        let xy = &x * &y;
        assert_eq!(xy.terms(), &[(Complex64::i(), "Z".parse().unwrap())]);
        let anti = &xy + &(&y * &x);
        assert!(anti.is_zero());
    }
}
