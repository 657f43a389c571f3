//! One-dimensional Fermi-Hubbard chain.
//!
//! Spin orbitals are laid out in two blocks: mode `i` is site `i` spin up and
//! mode `L + i` is site `i` spin down, for `i < L`.

use num_complex::Complex64;

use super::SolverError;
use crate::operator::{
    jordan_wigner_sum, lanczos_ground_state, FermionTerm, GroundState, Ladder, LanczosOptions, PauliSum,
};

/// Particle-number sector `(n_up, n_down)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HubbardSector {
    pub n_up: usize,
    pub n_down: usize,
}

impl HubbardSector {
    /// One electron per site with `S_z` as close to zero as possible.
    pub fn half_filling(l: usize) -> Self {
        Self { n_up: l.div_ceil(2), n_down: l / 2 }
    }

    pub fn contains(&self, l: usize, basis_index: usize) -> bool {
        let up_mask = (1usize << l) - 1;
        (basis_index & up_mask).count_ones() as usize == self.n_up
            && ((basis_index >> l) & up_mask).count_ones() as usize == self.n_down
    }
}

pub fn up_mode(site: usize) -> usize {
    site
}

pub fn down_mode(l: usize, site: usize) -> usize {
    l + site
}

/// Jordan-Wigner image of
/// `-t sum_{i,s} (c†_{i,s} c_{i+1,s} + h.c.) + U sum_i n_{i,up} n_{i,down}`.
pub fn hubbard_hamiltonian(l: usize, t: f64, u: f64) -> Result<PauliSum, SolverError> {
    if l == 0 {
        return Err(SolverError::InvalidParameter { name: "L", reason: "must be at least 1".into() });
    }
    let mut terms = Vec::new();
    for i in 0..l - 1 {
        for (p, q) in [(up_mode(i), up_mode(i + 1)), (down_mode(l, i), down_mode(l, i + 1))] {
            terms.push(FermionTerm::hopping(-t, p, q));
            terms.push(FermionTerm::hopping(-t, q, p));
        }
    }
    for i in 0..l {
        let (a, b) = (up_mode(i), down_mode(l, i));
        terms.push(FermionTerm::new(
            Complex64::new(u, 0.0),
            vec![Ladder::create(a), Ladder::annihilate(a), Ladder::create(b), Ladder::annihilate(b)],
        ));
    }
    Ok(jordan_wigner_sum(&terms, 2 * l)?)
}

/// Lanczos ground state restricted to `sector`.
///
/// The start vector is supported on the sector only, and the converged
/// vector is checked to carry no weight outside it.
pub fn hubbard_ground_state(
    l: usize,
    t: f64,
    u: f64,
    sector: HubbardSector,
    opts: &LanczosOptions,
) -> Result<GroundState, SolverError> {
    if sector.n_up > l || sector.n_down > l {
        return Err(SolverError::SectorEmpty);
    }
    let h = hubbard_hamiltonian(l, t, u)?;
    super::check_qubits(h.n_qubits(), super::LANCZOS_QUBIT_CAP)?;
    let inside = |b: usize| sector.contains(l, b);
    let gs = lanczos_ground_state(
        |x, y| h.apply_into(x, y).expect("dimension fixed by construction"),
        h.dim(),
        opts,
        Some(&inside),
    )?;
    let leak: f64 = gs
        .vector
        .iter()
        .enumerate()
        .filter(|(b, _)| !inside(*b))
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if leak > 1e-10 {
        return Err(SolverError::SectorLeak(leak));
    }
    Ok(gs)
}

/// Dense diagonalization of the sector block.
pub fn hubbard_ground_energy_dense(l: usize, t: f64, u: f64, sector: HubbardSector) -> Result<f64, SolverError> {
    let h = hubbard_hamiltonian(l, t, u)?;
    super::sector_ground_energy_dense(&h, |b| sector.contains(l, b))
}
