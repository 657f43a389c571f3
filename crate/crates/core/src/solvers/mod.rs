//! Classical reference solvers for the five problem families.

mod fci;
mod fcidump;
mod hubbard;
mod maxcut;
mod schwinger;
mod tfim;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fci::{fci_ground_state, fci_matrix, molecular_hamiltonian, spin_counts, FciResult, FCI_DETERMINANT_CAP};
pub use fcidump::{parse_fcidump, FcidumpError, IntegralSet, SYMMETRY_TOLERANCE};
pub use hubbard::{
    down_mode, hubbard_ground_energy_dense, hubbard_ground_state, hubbard_hamiltonian, up_mode, HubbardSector,
};
pub use maxcut::{ising_hamiltonian, maxcut_bruteforce, maxcut_from_ising, Cut, WeightedGraph, MAXCUT_VERTEX_CAP};
pub use schwinger::{
    electric_field, particle_density, schwinger_evolve, schwinger_evolve_state, schwinger_hamiltonian,
    staggered_vacuum, staggered_vacuum_index, InitialState, Observable, SchwingerParams,
};
pub use tfim::tfim_hamiltonian;

use crate::operator::{ground_state, hermitian_eigen, to_dense_capped, LanczosOptions, OperatorError, DENSE_QUBIT_CAP};
use crate::registry::{Family, ProblemInstance};

/// Largest register handled by the matrix-free Lanczos path.
pub const LANCZOS_QUBIT_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Fcidump(#[from] FcidumpError),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown family descriptor {0:?}")]
    UnknownFamily(String),
    #[error("problem size {size} exceeds solver cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("particle-number sector is empty")]
    SectorEmpty,
    #[error("ground state leaked out of its sector (weight {0:.3e})")]
    SectorLeak(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("no bundled integrals for bond length {0} (bundled: 0.500, 0.735, 1.000, 1.500)")]
    NoIntegrals(f64),
    #[error("failed to read integral file {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub solver: String,
    pub wall_time_s: f64,
    pub iterations: Option<usize>,
    pub n_qubits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    pub value: f64,
    pub meta: SolverMeta,
}

pub(crate) fn check_qubits(n_qubits: usize, cap: usize) -> Result<(), SolverError> {
    if n_qubits > cap {
        Err(SolverError::CapExceeded { size: n_qubits, cap })
    } else {
        Ok(())
    }
}

/// Lowest eigenvalue of the block of `h` spanned by basis states satisfying `inside`.
pub fn sector_ground_energy_dense(
    h: &crate::operator::PauliSum,
    inside: impl Fn(usize) -> bool,
) -> Result<f64, SolverError> {
    let full = to_dense_capped(h, DENSE_QUBIT_CAP)?;
    let basis: Vec<usize> = (0..h.dim()).filter(|&b| inside(b)).collect();
    if basis.is_empty() {
        return Err(SolverError::SectorEmpty);
    }
    let block = nalgebra::DMatrix::from_fn(basis.len(), basis.len(), |r, c| full[(basis[r], basis[c])]);
    Ok(hermitian_eigen(block).values[0])
}

const BUNDLED_H2: [(&str, &str); 4] = [
    ("0.500", include_str!("../../data/fcidump/h2_sto3g_bl0.500.fcidump")),
    ("0.735", include_str!("../../data/fcidump/h2_sto3g_bl0.735.fcidump")),
    ("1.000", include_str!("../../data/fcidump/h2_sto3g_bl1.000.fcidump")),
    ("1.500", include_str!("../../data/fcidump/h2_sto3g_bl1.500.fcidump")),
];

/// Bundled STO-3G integrals for H2 at bond length `bl` (Angstrom).
pub fn bundled_h2_integrals(bl: f64) -> Result<IntegralSet, SolverError> {
    let key = format!("{bl:.3}");
    let (_, text) = BUNDLED_H2
        .iter()
        .find(|(k, _)| *k == key && (bl - k.parse::<f64>().unwrap_or(f64::NAN)).abs() < 1e-9)
        .ok_or(SolverError::NoIntegrals(bl))?;
    Ok(parse_fcidump(text)?)
}

pub fn load_integrals(path: &Path) -> Result<IntegralSet, SolverError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SolverError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(parse_fcidump(&text)?)
}

fn require<T>(value: Option<T>, name: &'static str) -> Result<T, SolverError> {
    value.ok_or_else(|| SolverError::InvalidParameter { name, reason: "missing or wrong type".into() })
}

fn lanczos_result(energy: f64, iterations: usize, n_qubits: usize, start: Instant, solver: &str) -> ReferenceResult {
    ReferenceResult {
        value: energy,
        meta: SolverMeta {
            solver: solver.into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: Some(iterations),
            n_qubits: Some(n_qubits),
        },
    }
}

/// Computes the reference value for a validated instance.
pub fn solve_reference(instance: &ProblemInstance) -> Result<ReferenceResult, SolverError> {
    let family = instance.family().ok_or_else(|| SolverError::UnknownFamily(instance.descriptor.clone()))?;
    let start = Instant::now();
    let opts = LanczosOptions::default();
    let result = match family {
        Family::Tfim => {
            let l = require(instance.count("L"), "L")?;
            check_qubits(l, LANCZOS_QUBIT_CAP)?;
            let h = tfim_hamiltonian(l, require(instance.number("J"), "J")?, require(instance.number("h"), "h")?)?;
            let (e, _, gs) = ground_state(&h, &opts)?;
            lanczos_result(e, gs.iterations, l, start, "lanczos")
        }
        Family::Hubbard => {
            let l = require(instance.count("L"), "L")?;
            let (t, u) = (require(instance.number("t"), "t")?, require(instance.number("U"), "U")?);
            let gs = hubbard_ground_state(l, t, u, HubbardSector::half_filling(l), &opts)?;
            lanczos_result(gs.energy, gs.iterations, 2 * l, start, "lanczos-sector")
        }
        Family::MaxCut => {
            let n = require(instance.count("N"), "N")?;
            let g = WeightedGraph::new(n, require(instance.edges("E"), "E")?.to_vec())?;
            let cut = maxcut_bruteforce(&g)?;
            ReferenceResult {
                value: cut.value,
                meta: SolverMeta {
                    solver: "exhaustive".into(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                    iterations: Some(1usize << n.saturating_sub(1)),
                    n_qubits: Some(n),
                },
            }
        }
        Family::Schwinger => {
            let p = SchwingerParams {
                l: require(instance.count("L"), "L")?,
                hopping: require(instance.number("h"), "h")?,
                g: require(instance.number("g"), "g")?,
                m: require(instance.number("m"), "m")?,
            };
            let t = require(instance.number("T"), "T")?;
            schwinger_evolve(&p, &InitialState::StaggeredVacuum, t, &Observable::ParticleDensity)?
        }
        Family::H2 => {
            let ints = match &instance.integrals {
                Some(path) => load_integrals(path)?,
                None => bundled_h2_integrals(require(instance.number("BL"), "BL")?)?,
            };
            let r = fci_ground_state(&ints)?;
            ReferenceResult {
                value: r.energy,
                meta: SolverMeta {
                    solver: "fci".into(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                    iterations: None,
                    n_qubits: Some(2 * ints.n_orbitals()),
                },
            }
        }
    };
    if !result.value.is_finite() {
        return Err(SolverError::NonFinite("reference value"));
    }
    Ok(result)
}

/// Hash of everything that determines an instance's reference value.
pub fn instance_content_hash(instance: &ProblemInstance) -> String {
    let mut hasher = Sha256::new();
    hasher.update(instance.descriptor.as_bytes());
    hasher.update([0]);
    for (name, value) in instance.resolved_params() {
        hasher.update(name.as_bytes());
        hasher.update(b"=");
        hasher.update(serde_json::to_vec(&value).expect("parameters serialize"));
        hasher.update([0]);
    }
    if let Some(path) = &instance.integrals {
        match std::fs::read(path) {
            Ok(bytes) => hasher.update(&bytes),
            Err(_) => hasher.update(path.to_string_lossy().as_bytes()),
        }
    }
    hex::encode(hasher.finalize())
}

type Slot = Arc<OnceLock<Result<ReferenceResult, SolverError>>>;

/// Per-instance memo of reference results, shareable across worker threads.
///
/// Each distinct instance content is solved at most once; concurrent callers
/// asking for the same instance wait for the first computation.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    slots: Mutex<HashMap<String, Slot>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_solve(&self, instance: &ProblemInstance) -> Result<ReferenceResult, SolverError> {
        let key = instance_content_hash(instance);
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            Arc::clone(slots.entry(key).or_default())
        };
        slot.get_or_init(|| solve_reference(instance)).clone()
    }

    /// Number of instances solved (or attempted) so far.
    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock poisoned").values().filter(|s| s.get().is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
