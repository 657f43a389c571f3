//! FCIDUMP integral files.
//!
//! A namelist header (`&FCI NORB=..., NELEC=..., MS2=..., &END`) followed by
//! lines `value i j k l` with 1-based orbital indices: two-body integrals in
//! chemist's notation `(ij|kl)`, one-body `h_ij` as `value i j 0 0`, and the
//! core energy as `value 0 0 0 0`. Only one member of each symmetry class
//! needs to be listed.

use std::fmt::Write as _;

use regex::Regex;
use thiserror::Error;

/// Tolerance for the permutational symmetries of the integral tables.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcidumpError {
    #[error("missing FCIDUMP header field {0}")]
    MissingField(&'static str),
    #[error("malformed FCIDUMP header: {0}")]
    Header(String),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("orbital index {index} out of range for {n_orbitals} orbitals")]
    IndexOutOfRange { index: usize, n_orbitals: usize },
    #[error("integral symmetry violated at {indices:?}: {a} vs {b}")]
    Symmetry { indices: [usize; 4], a: f64, b: f64 },
    #[error("table size {got} does not match {expected}")]
    Shape { expected: usize, got: usize },
}

/// Molecular integrals over spatial orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i64,
    core_energy: f64,
    one_body: Vec<f64>,
    two_body: Vec<f64>,
}

fn two_body_partners(p: usize, q: usize, r: usize, s: usize) -> [[usize; 4]; 8] {
    [
        [p, q, r, s],
        [q, p, r, s],
        [p, q, s, r],
        [q, p, s, r],
        [r, s, p, q],
        [s, r, p, q],
        [r, s, q, p],
        [s, r, q, p],
    ]
}

impl IntegralSet {
    /// `one_body` is row-major `n x n`, `two_body` is `(pq|rs)` at
    /// `((p n + q) n + r) n + s`.
    pub fn new(
        n_orbitals: usize,
        n_electrons: usize,
        ms2: i64,
        core_energy: f64,
        one_body: Vec<f64>,
        two_body: Vec<f64>,
    ) -> Result<Self, FcidumpError> {
        let n = n_orbitals;
        if one_body.len() != n * n {
            return Err(FcidumpError::Shape { expected: n * n, got: one_body.len() });
        }
        if two_body.len() != n.pow(4) {
            return Err(FcidumpError::Shape { expected: n.pow(4), got: two_body.len() });
        }
        let set = Self { n_orbitals, n_electrons, ms2, core_energy, one_body, two_body };
        set.check_symmetry()?;
        Ok(set)
    }

    fn check_symmetry(&self) -> Result<(), FcidumpError> {
        let n = self.n_orbitals;
        for p in 0..n {
            for q in 0..n {
                let (a, b) = (self.h(p, q), self.h(q, p));
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(FcidumpError::Symmetry { indices: [p + 1, q + 1, 0, 0], a, b });
                }
                for r in 0..n {
                    for s in 0..n {
                        let a = self.eri(p, q, r, s);
                        for [i, j, k, l] in two_body_partners(p, q, r, s) {
                            let b = self.eri(i, j, k, l);
                            if (a - b).abs() > SYMMETRY_TOLERANCE {
                                return Err(FcidumpError::Symmetry { indices: [p + 1, q + 1, r + 1, s + 1], a, b });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    /// Twice the spin projection, `N_alpha - N_beta`.
    pub fn ms2(&self) -> i64 {
        self.ms2
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    /// One-body integral `h_pq` (0-based).
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.one_body[p * self.n_orbitals + q]
    }

    /// Two-body integral `(pq|rs)` in chemist's notation (0-based).
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_orbitals;
        self.two_body[((p * n + q) * n + r) * n + s]
    }

    /// Relabels orbitals so that new orbital `i` is old orbital `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, FcidumpError> {
        let n = self.n_orbitals;
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(FcidumpError::Shape { expected: n, got: perm.len() });
        }
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(FcidumpError::IndexOutOfRange { index: p, n_orbitals: n });
            }
        }
        let one_body = (0..n * n).map(|i| self.h(perm[i / n], perm[i % n])).collect();
        let mut two_body = vec![0.0; n.pow(4)];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        two_body[((p * n + q) * n + r) * n + s] = self.eri(perm[p], perm[q], perm[r], perm[s]);
                    }
                }
            }
        }
        Self::new(n, self.n_electrons, self.ms2, self.core_energy, one_body, two_body)
    }

    /// Writes one representative per symmetry class, 1-based.
    pub fn to_fcidump(&self) -> String {
        let n = self.n_orbitals;
        let mut out = String::new();
        let orbsym = vec!["1"; n].join(",");
        let _ = writeln!(out, " &FCI NORB={n},NELEC={},MS2={},", self.n_electrons, self.ms2);
        let _ = writeln!(out, "  ORBSYM={orbsym},");
        let _ = writeln!(out, "  ISYM=1,");
        let _ = writeln!(out, " &END");
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if p * n + q < r * n + s {
                            continue;
                        }
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            let _ = writeln!(out, "{v:24.16e} {:4} {:4} {:4} {:4}", p + 1, q + 1, r + 1, s + 1);
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..=p {
                let v = self.h(p, q);
                if v != 0.0 {
                    let _ = writeln!(out, "{v:24.16e} {:4} {:4} {:4} {:4}", p + 1, q + 1, 0, 0);
                }
            }
        }
        let _ = writeln!(out, "{:24.16e} {:4} {:4} {:4} {:4}", self.core_energy, 0, 0, 0, 0);
        out
    }
}

fn header_field(header: &str, name: &'static str) -> Result<Option<i64>, FcidumpError> {
    let re = Regex::new(&format!(r"(?i)\b{name}\s*=\s*(-?\d+)")).expect("static pattern");
    match re.captures(header) {
        None => Ok(None),
        Some(c) => c[1].parse().map(Some).map_err(|_| FcidumpError::Header(format!("bad value for {name}"))),
    }
}

pub fn parse_fcidump(text: &str) -> Result<IntegralSet, FcidumpError> {
    let end = Regex::new(r"(?im)(&END|^\s*/\s*$)").expect("static pattern");
    let m = end.find(text).ok_or_else(|| FcidumpError::Header("no &END terminator".into()))?;
    let header = &text[..m.start()];
    if !header.to_ascii_uppercase().contains("&FCI") {
        return Err(FcidumpError::Header("no &FCI namelist".into()));
    }
    let n = header_field(header, "NORB")?.ok_or(FcidumpError::MissingField("NORB"))?;
    let nelec = header_field(header, "NELEC")?.ok_or(FcidumpError::MissingField("NELEC"))?;
    let ms2 = header_field(header, "MS2")?.unwrap_or(0);
    if n < 1 || nelec < 0 {
        return Err(FcidumpError::Header(format!("NORB={n}, NELEC={nelec}")));
    }
    let n = n as usize;
    let first_body_line = text[..m.end()].lines().count() + 1;

    let mut one: Vec<Option<f64>> = vec![None; n * n];
    let mut two: Vec<Option<f64>> = vec![None; n.pow(4)];
    let mut core = 0.0;
    let store = |slot: &mut Option<f64>, v: f64, indices: [usize; 4]| -> Result<(), FcidumpError> {
        match *slot {
            Some(old) if (old - v).abs() > SYMMETRY_TOLERANCE => Err(FcidumpError::Symmetry { indices, a: old, b: v }),
            _ => {
                *slot = Some(v);
                Ok(())
            }
        }
    };
    for (offset, raw) in text[m.end()..].lines().skip(1).enumerate() {
        let line = first_body_line + offset;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(FcidumpError::Line { line, reason: format!("expected 5 fields, got {}", fields.len()) });
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| FcidumpError::Line { line, reason: format!("bad value {:?}", fields[0]) })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| FcidumpError::Line { line, reason: format!("bad index {f:?}") })?;
            if *slot > n {
                return Err(FcidumpError::IndexOutOfRange { index: *slot, n_orbitals: n });
            }
        }
        match idx {
            [0, 0, 0, 0] => core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                store(&mut one[p * n + q], value, idx)?;
                store(&mut one[q * n + p], value, idx)?;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                for [p, q, r, s] in two_body_partners(i - 1, j - 1, k - 1, l - 1) {
                    store(&mut two[((p * n + q) * n + r) * n + s], value, idx)?;
                }
            }
            // Orbital energies (`value i 0 0 0`) carry no extra information.
            [_, 0, 0, 0] => {}
            _ => return Err(FcidumpError::Line { line, reason: format!("unrecognized index pattern {idx:?}") }),
        }
    }
    IntegralSet::new(
        n,
        nelec as usize,
        ms2,
        core,
        one.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
        two.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
    )
}
