import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.linalg import expm

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_op(n, ops):
    """Kronecker-product operator with qubit n-1 leftmost (little-endian index)."""
    mats = [PAULI[dict(ops).get(q, "I")] for q in reversed(range(n))]
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def dense_heisenberg_pair(alpha):
    """exp(-i alpha (XX+YY+ZZ)) on two qubits, via scipy."""
    s = sum(np.kron(PAULI[p], PAULI[p]) for p in "XYZ")
    return expm(-1j * alpha * s)


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# acceptance criteria report: one line per criterion, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
