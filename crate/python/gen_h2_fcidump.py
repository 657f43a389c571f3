#!/usr/bin/env python3
"""Generate minimal-basis (STO-3G) H2 integral files in FCIDUMP format.

Integrals over contracted s-type Gaussians are evaluated in closed form, then
transformed to the symmetry-adapted molecular orbitals sigma_g / sigma_u, which
are the exact RHF orbitals of H2 in this basis. Only numpy and scipy are used.

Usage:
    python3 python/gen_h2_fcidump.py crates/core/data/fcidump
"""

import math
import sys
from pathlib import Path

import numpy as np
from scipy.special import erf

ANGSTROM_TO_BOHR = 1.0 / 0.52917721092
BOND_LENGTHS = [0.5, 0.735, 1.0, 1.5]

# STO-3G hydrogen 1s (zeta = 1.24)
EXPONENTS = np.array([3.42525091, 0.62391373, 0.16885540])
COEFFS = np.array([0.15432897, 0.53532814, 0.44463454])
NORMS = (2.0 * EXPONENTS / math.pi) ** 0.75


def boys0(t):
    if t < 1e-12:
        return 1.0 - t / 3.0
    return 0.5 * math.sqrt(math.pi / t) * erf(math.sqrt(t))


def contracted(centers):
    """Primitive lists (exponent, weight, center) for each basis function."""
    return [
        [(a, d * n, c) for a, d, n in zip(EXPONENTS, COEFFS, NORMS)]
        for c in centers
    ]


def one_body(basis, nuclei):
    nb = len(basis)
    s = np.zeros((nb, nb))
    t = np.zeros((nb, nb))
    v = np.zeros((nb, nb))
    for i, fi in enumerate(basis):
        for j, fj in enumerate(basis):
            for a, da, ra in fi:
                for b, db, rb in fj:
                    p = a + b
                    mu = a * b / p
                    rab2 = float(np.dot(ra - rb, ra - rb))
                    pre = da * db * math.exp(-mu * rab2)
                    rp = (a * ra + b * rb) / p
                    s[i, j] += pre * (math.pi / p) ** 1.5
                    t[i, j] += pre * mu * (3.0 - 2.0 * mu * rab2) * (math.pi / p) ** 1.5
                    for zc, rc in nuclei:
                        rpc2 = float(np.dot(rp - rc, rp - rc))
                        v[i, j] += -pre * 2.0 * math.pi / p * zc * boys0(p * rpc2)
    return s, t + v


def two_body(basis):
    nb = len(basis)
    eri = np.zeros((nb, nb, nb, nb))
    for i in range(nb):
        for j in range(nb):
            for k in range(nb):
                for l in range(nb):
                    val = 0.0
                    for a, da, ra in basis[i]:
                        for b, db, rb in basis[j]:
                            p = a + b
                            rp = (a * ra + b * rb) / p
                            eab = math.exp(-a * b / p * float(np.dot(ra - rb, ra - rb)))
                            for c, dc, rc in basis[k]:
                                for d, dd, rd in basis[l]:
                                    q = c + d
                                    rq = (c * rc + d * rd) / q
                                    ecd = math.exp(-c * d / q * float(np.dot(rc - rd, rc - rd)))
                                    rpq2 = float(np.dot(rp - rq, rp - rq))
                                    val += (
                                        da * db * dc * dd
                                        * 2.0 * math.pi ** 2.5
                                        / (p * q * math.sqrt(p + q))
                                        * eab * ecd
                                        * boys0(p * q / (p + q) * rpq2)
                                    )
                    eri[i, j, k, l] = val
    return eri


def h2_integrals(bond_length_angstrom):
    r = bond_length_angstrom * ANGSTROM_TO_BOHR
    centers = [np.zeros(3), np.array([0.0, 0.0, r])]
    basis = contracted(centers)
    s, hcore = one_body(basis, [(1.0, c) for c in centers])
    eri = two_body(basis)
    s12 = s[0, 1]
    mo = np.array([
        [1.0 / math.sqrt(2.0 * (1.0 + s12)), 1.0 / math.sqrt(2.0 * (1.0 - s12))],
        [1.0 / math.sqrt(2.0 * (1.0 + s12)), -1.0 / math.sqrt(2.0 * (1.0 - s12))],
    ])
    h_mo = mo.T @ hcore @ mo
    eri_mo = np.einsum("pi,qj,rk,sl,pqrs->ijkl", mo, mo, mo, mo, eri)
    return 1.0 / r, h_mo, eri_mo


def write_fcidump(path, core, h, eri, nelec, comment):
    n = h.shape[0]
    lines = [
        f" &FCI NORB={n:3d},NELEC={nelec:3d},MS2=0,",
        "  ORBSYM=" + "1," * n,
        "  ISYM=1,",
        " &END",
    ]
    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                        continue
                    v = eri[i, j, k, l]
                    if abs(v) > 1e-12:
                        lines.append(f"{v:24.16e} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}")
    for i in range(n):
        for j in range(i + 1):
            if abs(h[i, j]) > 1e-12:
                lines.append(f"{h[i, j]:24.16e} {i + 1:4d} {j + 1:4d} {0:4d} {0:4d}")
    lines.append(f"{core:24.16e} {0:4d} {0:4d} {0:4d} {0:4d}")
    path.write_text(f"! {comment}\n" + "\n".join(lines) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/fcidump")
    out.mkdir(parents=True, exist_ok=True)
    for bl in BOND_LENGTHS:
        core, h, eri = h2_integrals(bl)
        name = f"h2_sto3g_bl{bl:.3f}.fcidump"
        write_fcidump(
            out / name, core, h, eri, 2,
            f"H2 STO-3G, bond length {bl:.3f} Angstrom, RHF molecular orbitals",
        )
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
