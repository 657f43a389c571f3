#!/usr/bin/env python3
"""Regenerate the pinned regression constants used by the Rust test suite.

Everything here is computed with plain dense linear algebra (numpy Kronecker
products, numpy.linalg.eigh, scipy.linalg.expm), deliberately sharing no code
with the Rust crate. Conventions:

  * qubit / mode k is bit k of the computational-basis index (bit = 1 means
    Z = -1, i.e. an occupied fermionic mode);
  * open chains everywhere;
  * Hubbard: half filling, n_up = ceil(L/2), n_down = floor(L/2);
  * Schwinger: staggered spin formulation, vacuum start, mean particle number.

Usage:
    python3 python/gen_fixtures.py  # writes crates/core/fixtures/reference_constants.json
"""

import datetime
import itertools
import json
import re
import sys
from functools import reduce
from pathlib import Path

import numpy as np
import scipy
import scipy.linalg
import tomli

ROOT = Path(__file__).resolve().parent.parent
CORE = ROOT / "crates" / "core"

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, removes a particle


def site_op(op, k, n):
    """op acting on qubit k of n; qubit 0 is the least significant bit."""
    factors = [I2] * n
    factors[k] = op
    return reduce(np.kron, reversed(factors))


def annihilator(j, n):
    factors = [I2] * n
    for k in range(j):
        factors[k] = Z
    factors[j] = LOWER
    return reduce(np.kron, reversed(factors))


def ground_in_subspace(h, basis):
    sub = h[np.ix_(basis, basis)]
    return float(np.linalg.eigvalsh(sub)[0])


def tfim(L, J, hx):
    dim = 2 ** L
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(L - 1):
        h -= J * site_op(Z, i, L) @ site_op(Z, i + 1, L)
    for i in range(L):
        h -= hx * site_op(X, i, L)
    return h


def hubbard_ground(L, t, U, n_up=None, n_down=None):
    # interleaved ordering: mode 2*i + s, s = 0 (up) / 1 (down)
    n = 2 * L
    a = [annihilator(j, n) for j in range(n)]
    num = [m.conj().T @ m for m in a]
    h = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(L - 1):
        for s in range(2):
            p, q = 2 * i + s, 2 * (i + 1) + s
            hop = a[p].conj().T @ a[q]
            h -= t * (hop + hop.conj().T)
    for i in range(L):
        h += U * num[2 * i] @ num[2 * i + 1]
    n_up = (L + 1) // 2 if n_up is None else n_up
    n_down = L // 2 if n_down is None else n_down
    basis = [
        b for b in range(2 ** n)
        if sum((b >> (2 * i)) & 1 for i in range(L)) == n_up
        and sum((b >> (2 * i + 1)) & 1 for i in range(L)) == n_down
    ]
    return ground_in_subspace(h, basis)


def maxcut(n, edges):
    best = -np.inf
    for bits in itertools.product([0, 1], repeat=n):
        cut = sum(w for u, v, w in edges if bits[u] != bits[v])
        best = max(best, cut)
    return float(best)


def schwinger(L, hop, g, m):
    dim = 2 ** L
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(L - 1):
        h += 0.5 * hop * (
            site_op(X, i, L) @ site_op(X, i + 1, L) + site_op(Y, i, L) @ site_op(Y, i + 1, L)
        )
    for i in range(L):
        h += 0.5 * m * (-1) ** i * site_op(Z, i, L)
    for n in range(L - 1):
        field = sum(0.5 * (site_op(Z, k, L) + (-1) ** k * np.eye(dim)) for k in range(n + 1))
        h += g * field @ field
    return h


def schwinger_density_op(L):
    dim = 2 ** L
    return sum(0.5 * ((-1) ** i * site_op(Z, i, L) + np.eye(dim)) for i in range(L)) / L


def staggered_vacuum(L):
    psi = np.zeros(2 ** L, dtype=complex)
    psi[sum(1 << i for i in range(0, L, 2))] = 1.0
    return psi


def schwinger_evolved_density(L, hop, g, m, T):
    h = schwinger(L, hop, g, m)
    psi = scipy.linalg.expm(-1j * T * h) @ staggered_vacuum(L)
    return float(np.real(psi.conj() @ schwinger_density_op(L) @ psi))


def read_fcidump(path):
    text = Path(path).read_text()
    header, body = re.split(r"&END|/\s*\n", text, maxsplit=1)
    norb = int(re.search(r"NORB\s*=\s*(\d+)", header).group(1))
    nelec = int(re.search(r"NELEC\s*=\s*(\d+)", header).group(1))
    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb,) * 4)
    core = 0.0
    for line in body.splitlines():
        parts = line.split()
        if len(parts) != 5:
            continue
        v = float(parts[0])
        i, j, k, l = (int(x) for x in parts[1:])
        if i == j == k == l == 0:
            core = v
        elif k == l == 0:
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = v
        else:
            i, j, k, l = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in [
                (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
            ]:
                eri[a, b, c, d] = v
    return norb, nelec, core, h1, eri


def fci(path):
    norb, nelec, core, h1, eri = read_fcidump(path)
    n = 2 * norb  # interleaved spin orbitals 2p + s
    a = [annihilator(j, n) for j in range(n)]
    ad = [m.conj().T for m in a]
    dim = 2 ** n
    h = core * np.eye(dim, dtype=complex)
    for p in range(norb):
        for q in range(norb):
            for s in range(2):
                h += h1[p, q] * ad[2 * p + s] @ a[2 * q + s]
    for p, q, r, s_ in itertools.product(range(norb), repeat=4):
        v = eri[p, q, r, s_]
        if v == 0.0:
            continue
        for sg in range(2):
            for tau in range(2):
                h += 0.5 * v * ad[2 * p + sg] @ ad[2 * r + tau] @ a[2 * s_ + tau] @ a[2 * q + sg]
    half = nelec // 2
    basis = [
        b for b in range(dim)
        if sum((b >> (2 * p)) & 1 for p in range(norb)) == half
        and sum((b >> (2 * p + 1)) & 1 for p in range(norb)) == half
    ]
    ref = sum(1 << (2 * p + s) for p in range(half) for s in range(2))
    return ground_in_subspace(h, basis), float(np.real(h[ref, ref]))


def main():
    instances = tomli.loads((CORE / "data" / "instances.toml").read_text())["instance"]
    values = {}
    for inst in instances:
        d, p = inst["descriptor"], inst["params"]
        if d == "condensedmatter/tfim":
            values[inst["id"]] = float(np.linalg.eigvalsh(tfim(p["L"], p["J"], p["h"]))[0])
        elif d == "condensedmatter/hubbard":
            values[inst["id"]] = hubbard_ground(p["L"], p["t"], p["U"])
        elif d == "optimization/maxcut":
            values[inst["id"]] = maxcut(p["N"], p["E"])
        elif d == "gauge/schwinger":
            values[inst["id"]] = schwinger_evolved_density(
                p["L"], p["h"], p["g"], p.get("m", 0.5), p.get("T", 1.0)
            )
        elif d == "chem/h2":
            values[inst["id"]] = fci(CORE / "data" / "fcidump" / f"h2_sto3g_bl{p['BL']:.3f}.fcidump")[0]
        else:
            sys.exit(f"unknown descriptor {d}")

    h2 = {}
    for path in sorted((CORE / "data" / "fcidump").glob("h2_sto3g_bl*.fcidump")):
        bl = re.search(r"bl([0-9.]+)\.fcidump", path.name).group(1)
        e_fci, e_ref = fci(path)
        h2[bl] = {"fci_energy": e_fci, "reference_determinant_energy": e_ref}

    constants = {
        "schwinger_L4_h1_g1_m0.5_ground_energy": float(
            np.linalg.eigvalsh(schwinger(4, 1.0, 1.0, 0.5))[0]
        ),
        "schwinger_L4_h1_g1_m0.5_T1_density": schwinger_evolved_density(4, 1.0, 1.0, 0.5, 1.0),
        "hubbard_L2_t1_U8_ground_energy": hubbard_ground(2, 1.0, 8.0),
        "tfim_L2_J1_h1_ground_energy": float(np.linalg.eigvalsh(tfim(2, 1.0, 1.0))[0]),
    }

    out = {
        "generator": "python/gen_fixtures.py",
        "method": "dense diagonalization (numpy.linalg.eigh) and scipy.linalg.expm",
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "generated": datetime.date.today().isoformat(),
        "constants": constants,
        "h2": h2,
        "instances": values,
    }
    path = CORE / "fixtures" / "reference_constants.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
