"""Builds the extension module with cargo and exercises it from Python.

Usage: python3 python/smoke_test.py
"""

import cmath
import math
import pathlib
import shutil
import subprocess
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build() -> pathlib.Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "qloop-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libqloop.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / ("qloop" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, dest)
    return dest.parent


def main() -> None:
    sys.path.insert(0, str(build()))
    import qloop

    h = qloop.tfim_hamiltonian(2, 1.0, 1.0)
    assert abs(h.ground_energy() + math.sqrt(5)) < 1e-10
    assert abs(h.ground_energy_dense() + math.sqrt(5)) < 1e-10
    assert h.n_qubits == 2 and h.is_hermitian()

    z = qloop.PauliSum([(1.0, "ZI"), (0.5j, "XY")])
    assert len(z) == 2 and not z.is_hermitian()
    assert len(z.to_dense()) == 4

    n0 = qloop.jordan_wigner(1.0, [(0, True), (0, False)], 2)
    assert abs(n0.expectation([0, 1, 0, 0]) - 1.0) < 1e-12

    assert abs(qloop.hubbard_ground_energy(2, 1.0, 8.0) - (4 - 2 * math.sqrt(5))) < 1e-10
    value, partition = qloop.maxcut(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    assert value == 2.0 and len(partition) == 3
    assert qloop.schwinger_density(4, 1.0, 1.0, 0.5, 0.0) == 0.0
    assert qloop.fci_energy(bond_length=0.735) < -1.1

    ids = [i["id"] for i in qloop.instances()]
    assert len(ids) == 20 and "tfim-2-1-1" in ids
    ref, meta = qloop.solve_reference("maxcut-triangle")
    assert ref == 2.0 and meta["solver"] == "exhaustive"

    assert qloop.extract_code("Here:\n```python\nprint(1)\n```") == "print(1)\n"
    assert qloop.extract_code("The energy is about minus two.") is None
    assert qloop.parse_result("noise\nRESULT: -2.5\n") == -2.5
    assert qloop.classify("ModuleNotFoundError: No module named 'x'") == ("Deps", "ModuleNotFoundError")
    assert qloop.classify("", timed_out=True) == ("Timeout", None)

    p = qloop.mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert abs(p["p_value"] - 0.1) < 1e-12 and p["method"] == "exact"
    assert qloop.vargha_delaney([4, 5, 6], [1, 2, 3]) == (1.0, "L")

    try:
        qloop.PauliSum([(1.0, "XQ")])
    except ValueError:
        pass
    else:
        raise AssertionError("bad label accepted")
    assert cmath.isclose({s: c for c, s in z.terms()}["XY"], 0.5j)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
