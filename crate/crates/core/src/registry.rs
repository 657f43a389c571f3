//! Problem-instance definitions and the five registered family schemas.
//!
//! Instance files are TOML documents holding a list of `[[instance]]` tables:
//!
//! ```toml
//! version = 1
//!
//! [[instance]]
//! id = "tfim-2-1-1"
//! descriptor = "condensedmatter/tfim"
//! params = { L = 2, J = 1.0, h = 1.0 }
//! # optional:
//! timeout_s = 300
//! tolerance = { absolute = 1e-2, relative = 1e-3 }
//! ```
//!
//! MaxCut graphs are given inline as `N` plus an edge list
//! `E = [[u, v, w], ...]`. `chem/h2` instances select a bundled integral file
//! by bond length, or name one explicitly with `integrals = "path"`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Instance file bundled with the crate (four instances per family).
pub const BUNDLED_INSTANCES: &str = include_str!("../data/instances.toml");

pub const DEFAULT_TIMEOUT_S: f64 = 300.0;
pub const HUBBARD_TIMEOUT_S: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Hubbard,
    Tfim,
    MaxCut,
    Schwinger,
    H2,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Hubbard, Family::Tfim, Family::MaxCut, Family::Schwinger, Family::H2];

    pub fn descriptor(self) -> &'static str {
        match self {
            Family::Hubbard => "condensedmatter/hubbard",
            Family::Tfim => "condensedmatter/tfim",
            Family::MaxCut => "optimization/maxcut",
            Family::Schwinger => "gauge/schwinger",
            Family::H2 => "chem/h2",
        }
    }

    pub fn from_descriptor(descriptor: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.descriptor() == descriptor)
    }

    /// Short label used in report tables.
    pub fn short_id(self) -> &'static str {
        match self {
            Family::Hubbard => "PF1",
            Family::Tfim => "PF2",
            Family::MaxCut => "PF3",
            Family::Schwinger => "PF4",
            Family::H2 => "PF5",
        }
    }

    pub fn schema(self) -> &'static FamilySchema {
        &SCHEMAS[self as usize]
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.descriptor())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Positive integer such as a lattice size.
    Count,
    Real,
    /// `[[u, v, w], ...]` weighted edge list.
    Edges,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub description: &'static str,
    /// `Some` for optional parameters.
    pub default: Option<f64>,
}

const fn required(name: &'static str, kind: ParamKind, description: &'static str) -> ParamSpec {
    ParamSpec { name, kind, description, default: None }
}

const fn optional(name: &'static str, description: &'static str, default: f64) -> ParamSpec {
    ParamSpec { name, kind: ParamKind::Real, description, default: Some(default) }
}

#[derive(Debug)]
pub struct FamilySchema {
    pub family: Family,
    pub title: &'static str,
    pub params: &'static [ParamSpec],
    pub default_tolerance: Tolerance,
    pub default_timeout_s: f64,
    /// Hamiltonian and boundary conventions stated to the model verbatim.
    pub convention: &'static str,
    pub expected_output_label: &'static str,
    /// Name of the reference solver that [`crate::solvers::solve_reference`] dispatches to.
    pub solver: &'static str,
}

const DEFAULT_TOLERANCE: Tolerance = Tolerance { absolute: 1e-2, relative: 1e-3 };

static SCHEMAS: [FamilySchema; 5] = [
    FamilySchema {
        family: Family::Hubbard,
        title: "Fermi-Hubbard model",
        params: &[
            required("L", ParamKind::Count, "lattice size (number of sites)"),
            required("t", ParamKind::Real, "hopping strength"),
            required("U", ParamKind::Real, "on-site interaction"),
        ],
        default_tolerance: DEFAULT_TOLERANCE,
        default_timeout_s: HUBBARD_TIMEOUT_S,
        convention: "H = -t * sum_{i=0}^{L-2} sum_{s in {up,down}} (c^dag_{i,s} c_{i+1,s} + h.c.) \
+ U * sum_i n_{i,up} n_{i,down}, on an open 1-D chain of L sites (no periodic bond). \
Map fermions to qubits with the Jordan-Wigner transformation. \
Find the ground-state energy in the half-filled sector with total S_z as close to zero as possible: \
ceil(L/2) spin-up and floor(L/2) spin-down electrons.",
        expected_output_label: "ground-state energy",
        solver: "lanczos (particle-number sector)",
    },
    FamilySchema {
        family: Family::Tfim,
        title: "transverse-field Ising model",
        params: &[
            required("L", ParamKind::Count, "lattice size (number of spins)"),
            required("J", ParamKind::Real, "nearest-neighbour coupling"),
            required("h", ParamKind::Real, "transverse field"),
        ],
        default_tolerance: DEFAULT_TOLERANCE,
        default_timeout_s: DEFAULT_TIMEOUT_S,
        convention: "H = -J * sum_{i=0}^{L-2} Z_i Z_{i+1} - h * sum_{i=0}^{L-1} X_i, \
on an open chain of L spins (no periodic bond). Find the ground-state energy.",
        expected_output_label: "ground-state energy",
        solver: "lanczos",
    },
    FamilySchema {
        family: Family::MaxCut,
        title: "weighted MaxCut",
        params: &[
            required("N", ParamKind::Count, "number of vertices"),
            required("E", ParamKind::Edges, "weighted edges [u, v, w] with 0-based vertices"),
        ],
        default_tolerance: DEFAULT_TOLERANCE,
        default_timeout_s: DEFAULT_TIMEOUT_S,
        convention: "Maximize the total weight of edges whose endpoints lie in different parts of a \
bipartition of the N vertices. Equivalently, with the Ising Hamiltonian H = sum_{(u,v,w) in E} w Z_u Z_v \
and ground energy E0, the maximum cut equals (sum of all weights - E0) / 2. Report the maximum cut value.",
        expected_output_label: "maximum cut value",
        solver: "exhaustive enumeration",
    },
    FamilySchema {
        family: Family::Schwinger,
        title: "massive Schwinger model (dynamics)",
        params: &[
            required("L", ParamKind::Count, "lattice size (even number of staggered sites)"),
            required("h", ParamKind::Real, "hopping strength"),
            required("g", ParamKind::Real, "gauge coupling"),
            optional("m", "fermion mass", 0.5),
            optional("T", "evolution time", 1.0),
        ],
        default_tolerance: DEFAULT_TOLERANCE,
        default_timeout_s: DEFAULT_TIMEOUT_S,
        convention: "Staggered-fermion spin formulation with the gauge field eliminated by Gauss's law on an \
open chain of L sites: H = (h/2) * sum_{n=0}^{L-2} (X_n X_{n+1} + Y_n Y_{n+1}) + (m/2) * sum_n (-1)^n Z_n \
+ g * sum_{n=0}^{L-2} E_n^2, with E_n = sum_{k=0}^{n} (Z_k + (-1)^k) / 2. \
Start from the staggered vacuum (qubit n in |1> for even n, |0> for odd n), evolve for time T under H, \
and report the mean particle number (1/L) * sum_n ((-1)^n <Z_n> + 1) / 2 at time T.",
        expected_output_label: "mean particle number at time T",
        solver: "exact evolution (dense eigendecomposition)",
    },
    FamilySchema {
        family: Family::H2,
        title: "H2 molecular electronic structure",
        params: &[required("BL", ParamKind::Real, "bond length in Angstrom")],
        default_tolerance: DEFAULT_TOLERANCE,
        default_timeout_s: DEFAULT_TIMEOUT_S,
        convention: "Hydrogen molecule in the STO-3G minimal basis at bond length BL (Angstrom), \
2 electrons, singlet (S_z = 0) sector. Report the full configuration interaction ground-state \
energy in Hartree, including nuclear repulsion.",
        expected_output_label: "ground-state energy (Hartree)",
        solver: "full configuration interaction",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        DEFAULT_TOLERANCE
    }
}

impl Tolerance {
    /// Allowed deviation from `reference`: the looser of the two bounds.
    pub fn bound(&self, reference: f64) -> f64 {
        self.absolute.max(self.relative * reference.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Edges(Vec<(usize, usize, f64)>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(x) => write!(f, "{x}"),
            ParamValue::Edges(edges) => {
                write!(f, "[")?;
                for (k, (u, v, w)) in edges.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({u}, {v}, {w})")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: String,
    pub descriptor: String,
    pub params: BTreeMap<String, ParamValue>,
    pub tolerance: Tolerance,
    pub timeout_s: f64,
    pub prompt_template_id: String,
    pub expected_output_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrals: Option<PathBuf>,
}

/// One broken invariant, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn violation(key: &str, message: impl Into<String>) -> Violation {
    Violation { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("failed to parse instance file: {0}")]
    Parse(String),
    #[error("instance {id:?}: unknown family descriptor {descriptor:?}")]
    UnknownDescriptor { id: String, descriptor: String },
    #[error("instance {id:?}: schema violation: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    SchemaViolation { id: String, violations: Vec<Violation> },
    #[error("no instance with id {0:?}")]
    NotFound(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    id: String,
    descriptor: String,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
    tolerance: Option<Tolerance>,
    timeout_s: Option<f64>,
    prompt_template_id: Option<String>,
    expected_output_label: Option<String>,
    integrals: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    #[serde(default, rename = "instance")]
    instances: Vec<RawInstance>,
}

#[derive(Debug, Serialize)]
struct FileOut<'a> {
    version: u32,
    #[serde(rename = "instance")]
    instances: &'a [ProblemInstance],
}

impl ProblemInstance {
    pub fn family(&self) -> Option<Family> {
        Family::from_descriptor(&self.descriptor)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        match self.params.get(name) {
            Some(ParamValue::Number(x)) => Some(*x),
            _ => self
                .family()
                .and_then(|f| f.schema().params.iter().find(|p| p.name == name))
                .and_then(|p| p.default),
        }
    }

    /// Integer-valued parameter; validated instances always carry one.
    pub fn count(&self, name: &str) -> Option<usize> {
        self.number(name).filter(|x| x.fract() == 0.0 && *x >= 0.0).map(|x| x as usize)
    }

    pub fn edges(&self, name: &str) -> Option<&[(usize, usize, f64)]> {
        match self.params.get(name) {
            Some(ParamValue::Edges(e)) => Some(e),
            _ => None,
        }
    }

    /// Parameters including filled-in defaults, in schema order.
    pub fn resolved_params(&self) -> Vec<(&'static str, ParamValue)> {
        let Some(family) = self.family() else { return Vec::new() };
        family
            .schema()
            .params
            .iter()
            .filter_map(|spec| {
                self.params
                    .get(spec.name)
                    .cloned()
                    .or(spec.default.map(ParamValue::Number))
                    .map(|v| (spec.name, v))
            })
            .collect()
    }

    /// Directory-safe family label, e.g. `condensedmatter-tfim`.
    pub fn family_slug(&self) -> String {
        self.descriptor.replace('/', "-")
    }
}

/// Checks every invariant of a [`ProblemInstance`]; empty means valid.
pub fn validate(instance: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.id.trim().is_empty() {
        out.push(violation("id", "must not be empty"));
    }
    if instance.tolerance.absolute < 0.0 || instance.tolerance.relative < 0.0 {
        out.push(violation("tolerance", "tolerance must be non-negative"));
    }
    if !(instance.tolerance.absolute.is_finite() && instance.tolerance.relative.is_finite()) {
        out.push(violation("tolerance", "tolerance must be finite"));
    }
    if !(instance.timeout_s > 0.0 && instance.timeout_s.is_finite()) {
        out.push(violation("timeout_s", "timeout must be positive"));
    }
    let Some(family) = instance.family() else {
        out.push(violation("descriptor", format!("unknown family descriptor {:?}", instance.descriptor)));
        return out;
    };
    let schema = family.schema();
    for key in instance.params.keys() {
        if !schema.params.iter().any(|p| p.name == key) {
            out.push(violation(key, format!("not a parameter of {}", family.descriptor())));
        }
    }
    for spec in schema.params {
        let value = instance.params.get(spec.name);
        match (spec.kind, value) {
            (_, None) if spec.default.is_some() => {}
            (_, None) => out.push(violation(spec.name, "missing required parameter")),
            (ParamKind::Count, Some(ParamValue::Number(x))) => {
                if x.fract() != 0.0 || *x < 1.0 {
                    out.push(violation(spec.name, "must be a positive integer"));
                }
            }
            (ParamKind::Real, Some(ParamValue::Number(x))) => {
                if !x.is_finite() {
                    out.push(violation(spec.name, "must be finite"));
                }
            }
            (ParamKind::Edges, Some(ParamValue::Edges(_))) => {}
            (_, Some(_)) => out.push(violation(spec.name, "wrong parameter type")),
        }
    }
    if !out.is_empty() {
        return out;
    }
    match family {
        Family::Schwinger => {
            if instance.count("L").is_some_and(|l| l % 2 == 1) {
                out.push(violation("L", "must be even for staggered fermions"));
            }
        }
        Family::MaxCut => {
            let n = instance.count("N").unwrap_or(0);
            let mut seen = HashSet::new();
            for &(u, v, w) in instance.edges("E").unwrap_or_default() {
                if u >= n || v >= n {
                    out.push(violation("E", format!("edge ({u}, {v}) references a vertex >= N = {n}")));
                } else if u == v {
                    out.push(violation("E", format!("self loop on vertex {u}")));
                } else if !seen.insert((u.min(v), u.max(v))) {
                    out.push(violation("E", format!("duplicate edge ({u}, {v})")));
                }
                if !w.is_finite() {
                    out.push(violation("E", "edge weights must be finite"));
                }
            }
        }
        Family::H2 => {
            if instance.number("BL").is_some_and(|bl| bl <= 0.0) {
                out.push(violation("BL", "bond length must be positive"));
            }
        }
        Family::Hubbard | Family::Tfim => {}
    }
    out
}

fn fill(raw: RawInstance, base_dir: Option<&Path>) -> Result<ProblemInstance, RegistryError> {
    let family = Family::from_descriptor(&raw.descriptor).ok_or_else(|| RegistryError::UnknownDescriptor {
        id: raw.id.clone(),
        descriptor: raw.descriptor.clone(),
    })?;
    let schema = family.schema();
    let integrals = match (raw.integrals, base_dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (p, _) => p,
    };
    let instance = ProblemInstance {
        tolerance: raw.tolerance.unwrap_or(schema.default_tolerance),
        timeout_s: raw.timeout_s.unwrap_or(schema.default_timeout_s),
        prompt_template_id: raw.prompt_template_id.unwrap_or_else(|| family.descriptor().to_string()),
        expected_output_label: raw
            .expected_output_label
            .unwrap_or_else(|| schema.expected_output_label.to_string()),
        id: raw.id,
        descriptor: raw.descriptor,
        params: raw.params,
        integrals,
    };
    let violations = validate(&instance);
    if violations.is_empty() {
        Ok(instance)
    } else {
        Err(RegistryError::SchemaViolation { id: instance.id, violations })
    }
}

/// Parses and validates an instance document; relative integral paths are
/// resolved against `base_dir`.
pub fn parse_instances(text: &str, base_dir: Option<&Path>) -> Result<Vec<ProblemInstance>, RegistryError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| RegistryError::Parse(e.to_string()))?;
    let mut ids = HashSet::new();
    let mut out = Vec::with_capacity(raw.instances.len());
    for r in raw.instances {
        if !ids.insert(r.id.clone()) {
            return Err(RegistryError::SchemaViolation {
                id: r.id,
                violations: vec![violation("id", "duplicate instance id")],
            });
        }
        out.push(fill(r, base_dir)?);
    }
    Ok(out)
}

pub fn load_instances(path: &Path) -> Result<Vec<ProblemInstance>, RegistryError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| RegistryError::Io { path: path.to_path_buf(), source })?;
    parse_instances(&text, path.parent())
}

pub fn bundled_instances() -> Vec<ProblemInstance> {
    parse_instances(BUNDLED_INSTANCES, None).expect("bundled instance file is valid")
}

/// Serializes instances back to the TOML instance format, defaults made explicit.
pub fn to_toml(instances: &[ProblemInstance]) -> String {
    toml::to_string(&FileOut { version: 1, instances }).expect("instances serialize to TOML")
}

pub fn find<'a>(instances: &'a [ProblemInstance], id: &str) -> Result<&'a ProblemInstance, RegistryError> {
    instances.iter().find(|i| i.id == id).ok_or_else(|| RegistryError::NotFound(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tfim_gets_default_timeout() {
        let text = r#"
            [[instance]]
            id = "tfim-2-1-1"
            descriptor = "condensedmatter/tfim"
            params = { L = 2, J = 1, h = 1 }
        "#;
        let v = parse_instances(text, None).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].timeout_s, 300.0);
        assert_eq!(v[0].tolerance, Tolerance { absolute: 1e-2, relative: 1e-3 });
        assert_eq!(v[0].count("L"), Some(2));
    }

    #[test]
    fn hubbard_gets_long_timeout() {
        let text = r#"
            [[instance]]
            id = "h"
            descriptor = "condensedmatter/hubbard"
            params = { L = 2, t = 1.0, U = 4.0 }
        "#;
        assert_eq!(parse_instances(text, None).unwrap()[0].timeout_s, 3000.0);
    }

    #[test]
    fn missing_parameter_is_named() {
        let text = r#"
            [[instance]]
            id = "h"
            descriptor = "condensedmatter/hubbard"
            params = { L = 2, t = 1.0 }
        "#;
        match parse_instances(text, None).unwrap_err() {
            RegistryError::SchemaViolation { violations, .. } => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].key, "U");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_descriptor() {
        let text = "[[instance]]\nid = \"x\"\ndescriptor = \"foo/bar\"\n";
        assert!(matches!(parse_instances(text, None), Err(RegistryError::UnknownDescriptor { .. })));
    }

    #[test]
    fn parse_failure() {
        assert!(matches!(parse_instances("[[instance]\n", None), Err(RegistryError::Parse(_))));
    }

    #[test]
    fn negative_tolerance() {
        let mut inst = bundled_instances().remove(0);
        assert!(validate(&inst).is_empty());
        inst.tolerance.absolute = -1.0;
        let v = validate(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "tolerance must be non-negative");
    }

    #[test]
    fn h2_bond_length_instance() {
        let text = r#"
            [[instance]]
            id = "h2"
            descriptor = "chem/h2"
            params = { BL = 0.735 }
        "#;
        let v = parse_instances(text, None).unwrap();
        assert!(validate(&v[0]).is_empty());
    }

    #[test]
    fn maxcut_graph_checks() {
        let text = r#"
            [[instance]]
            id = "g"
            descriptor = "optimization/maxcut"
            params = { N = 3, E = [[0, 1, 1.0], [1, 0, 2.0], [2, 2, 1.0], [0, 5, 1.0]] }
        "#;
        match parse_instances(text, None).unwrap_err() {
            RegistryError::SchemaViolation { violations, .. } => assert_eq!(violations.len(), 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schwinger_odd_lattice_and_defaults() {
        let odd = "[[instance]]\nid = \"s\"\ndescriptor = \"gauge/schwinger\"\nparams = { L = 3, h = 1.0, g = 1.0 }\n";
        assert!(parse_instances(odd, None).is_err());
        let even = odd.replace("L = 3", "L = 4");
        let inst = &parse_instances(&even, None).unwrap()[0];
        assert_eq!(inst.number("m"), Some(0.5));
        assert_eq!(inst.number("T"), Some(1.0));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let text = "[[instance]]\nid = \"t\"\ndescriptor = \"condensedmatter/tfim\"\nparams = { L = 2, J = 1.0, h = 1.0, q = 3 }\n";
        match parse_instances(text, None).unwrap_err() {
            RegistryError::SchemaViolation { violations, .. } => assert_eq!(violations[0].key, "q"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bundled_set_has_four_per_family() {
        let all = bundled_instances();
        for f in Family::ALL {
            assert_eq!(all.iter().filter(|i| i.family() == Some(f)).count(), 4, "{f}");
        }
    }

    #[test]
    fn round_trip() {
        let all = bundled_instances();
        let again = parse_instances(&to_toml(&all), None).unwrap();
        assert_eq!(all, again);
    }
}
