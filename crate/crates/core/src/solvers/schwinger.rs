//! Lattice Schwinger model in the staggered spin formulation.
//!
//! With the gauge field integrated out through Gauss's law on an open chain,
//!
//! `H = (h/2) sum_n (X_n X_{n+1} + Y_n Y_{n+1}) + (m/2) sum_n (-1)^n Z_n + g sum_{n<L-1} E_n^2`,
//!
//! where `E_n = sum_{k<=n} (Z_k + (-1)^k) / 2`. Qubit `n` in `|1>` on an even
//! site is the filled Dirac sea, so the bare vacuum has the even qubits set.

use std::time::Instant;

use num_complex::Complex64;

use super::{ReferenceResult, SolverError, SolverMeta};
use crate::operator::{evolve_exact_capped, Pauli, PauliString, PauliSum, StateVector, DENSE_QUBIT_CAP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwingerParams {
    pub l: usize,
    pub hopping: f64,
    pub g: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    StaggeredVacuum,
    Basis(usize),
    State(StateVector),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `(1/L) sum_n ((-1)^n Z_n + 1) / 2`.
    ParticleDensity,
    Operator(PauliSum),
}

fn stagger(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn z(l: usize, k: usize) -> Result<PauliString, SolverError> {
    Ok(PauliString::from_sparse(l, &[(k, Pauli::Z)])?)
}

/// Electric field on link `n`, `E_n = sum_{k<=n} (Z_k + (-1)^k) / 2`.
pub fn electric_field(l: usize, n: usize) -> Result<PauliSum, SolverError> {
    let mut terms = vec![(Complex64::new(0.5 * (0..=n).map(stagger).sum::<f64>(), 0.0), PauliString::identity(l))];
    for k in 0..=n {
        terms.push((Complex64::new(0.5, 0.0), z(l, k)?));
    }
    Ok(PauliSum::from_terms(l, terms)?)
}

pub fn schwinger_hamiltonian(p: &SchwingerParams) -> Result<PauliSum, SolverError> {
    let l = p.l;
    if l < 2 || l % 2 == 1 {
        return Err(SolverError::InvalidParameter { name: "L", reason: format!("must be even and at least 2, got {l}") });
    }
    let mut terms = Vec::new();
    for n in 0..l - 1 {
        for letter in [Pauli::X, Pauli::Y] {
            terms.push((Complex64::new(0.5 * p.hopping, 0.0), PauliString::from_sparse(l, &[(n, letter), (n + 1, letter)])?));
        }
    }
    for n in 0..l {
        terms.push((Complex64::new(0.5 * p.m * stagger(n), 0.0), z(l, n)?));
    }
    let mut h = PauliSum::from_terms(l, terms)?;
    if p.g != 0.0 {
        for n in 0..l - 1 {
            let e = electric_field(l, n)?;
            h = h.try_add(&e.try_mul(&e)?.scale(Complex64::new(p.g, 0.0)))?;
        }
    }
    Ok(h)
}

/// Basis index of the bare vacuum: even qubits set.
pub fn staggered_vacuum_index(l: usize) -> usize {
    (0..l).step_by(2).fold(0, |acc, n| acc | (1 << n))
}

pub fn staggered_vacuum(l: usize) -> Result<StateVector, SolverError> {
    Ok(StateVector::basis(l, staggered_vacuum_index(l))?)
}

pub fn particle_density(l: usize) -> Result<PauliSum, SolverError> {
    let inv = 1.0 / l as f64;
    let mut terms = vec![(Complex64::new(0.5, 0.0), PauliString::identity(l))];
    for n in 0..l {
        terms.push((Complex64::new(0.5 * stagger(n) * inv, 0.0), z(l, n)?));
    }
    Ok(PauliSum::from_terms(l, terms)?)
}

fn initial_state(l: usize, psi0: &InitialState) -> Result<StateVector, SolverError> {
    match psi0 {
        InitialState::StaggeredVacuum => staggered_vacuum(l),
        InitialState::Basis(b) => Ok(StateVector::basis(l, *b)?),
        InitialState::State(s) => Ok(s.clone()),
    }
}

/// `e^{-iHT}|psi0>` by dense eigendecomposition.
pub fn schwinger_evolve_state(p: &SchwingerParams, psi0: &InitialState, time: f64) -> Result<StateVector, SolverError> {
    let h = schwinger_hamiltonian(p)?;
    let psi = initial_state(p.l, psi0)?;
    Ok(evolve_exact_capped(&h, &psi, time, DENSE_QUBIT_CAP)?)
}

/// `<psi(T)|O|psi(T)>` for the selected observable.
pub fn schwinger_evolve(
    p: &SchwingerParams,
    psi0: &InitialState,
    time: f64,
    observable: &Observable,
) -> Result<ReferenceResult, SolverError> {
    let start = Instant::now();
    let psi = schwinger_evolve_state(p, psi0, time)?;
    let value = match observable {
        Observable::ParticleDensity => psi.expectation(&particle_density(p.l)?)?,
        Observable::Operator(o) => psi.expectation(o)?,
    };
    Ok(ReferenceResult {
        value,
        meta: SolverMeta {
            solver: "exact-evolution".into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: None,
            n_qubits: Some(p.l),
        },
    })
}
