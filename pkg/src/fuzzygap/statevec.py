"""Dense statevector simulation on a little-endian qubit register."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .gates import Circuit, Gate
from .pauli import PauliSum

MAX_QUBITS = 30
IMAG_TOL = 1e-10


def _check_qubits(n_qubits: int, max_qubits: int = MAX_QUBITS) -> None:
    if n_qubits < 0 or n_qubits % 2:
        raise ValidationError(f"register must hold an even number of qubits, got {n_qubits}")
    if n_qubits > max_qubits:
        raise ValidationError(f"{n_qubits} qubits exceeds the configured maximum of {max_qubits}")


class StateVector:
    """``2**n_qubits`` complex amplitudes; qubit 0 is the least significant index bit.

    Gate application mutates ``amplitudes`` in place (the array may be
    rebound); callers wanting a snapshot should use :meth:`copy`.
    """

    def __init__(self, n_qubits: int, amplitudes: np.ndarray | None = None, max_qubits: int = MAX_QUBITS):
        _check_qubits(n_qubits, max_qubits)
        self.n_qubits = n_qubits
        if amplitudes is None:
            amplitudes = np.zeros(1 << n_qubits, dtype=complex)
            amplitudes[0] = 1.0
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (1 << n_qubits,):
            raise ValidationError(f"expected {1 << n_qubits} amplitudes, got shape {amplitudes.shape}")
        self.amplitudes = amplitudes

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy(), max_qubits=self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def support_weights(self, tol: float = 1e-14) -> set[int]:
        """Hamming weights of basis states carrying probability above ``tol``."""
        idx = np.nonzero(self.probabilities() > tol)[0]
        return set(np.unique(_kernels.popcount(idx)).tolist())

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def bits_to_index(bits: str) -> int:
    """``"0101"`` (qubit 0 first) -> ``0b1010``."""
    if any(c not in "01" for c in bits):
        raise ValidationError(f"bitstring must contain only 0/1, got {bits!r}")
    return sum(1 << q for q, c in enumerate(bits) if c == "1")


def index_to_bits(index: int, n_qubits: int) -> str:
    return "".join("1" if (index >> q) & 1 else "0" for q in range(n_qubits))


def new_basis_state(n_qubits: int, bits: str, max_qubits: int = MAX_QUBITS) -> StateVector:
    _check_qubits(n_qubits, max_qubits)
    if len(bits) != n_qubits:
        raise ValidationError(f"bitstring length {len(bits)} does not match {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[bits_to_index(bits)] = 1.0
    return StateVector(n_qubits, amps, max_qubits)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    n = state.n_qubits
    if max(gate.qubits) >= n:
        raise ValidationError(f"{gate} addresses a qubit outside a {n}-qubit register")
    if gate.kind == "HeisenbergExp":
        state.amplitudes = _kernels.apply_heisenberg(state.amplitudes, gate.angle, *gate.qubits, n)
    elif gate.kind in ("Rz", "Z", "S", "Sdg", "Rzz"):
        state.amplitudes = _apply_diagonal(state.amplitudes, gate, n)
    else:
        state.amplitudes = _kernels.apply_matrix(state.amplitudes, gate.matrix(), gate.qubits, n)
    return state


def _apply_diagonal(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    d = np.diag(gate.matrix())
    t = psi.reshape((2,) * n)
    if len(gate.qubits) == 1:
        shape = [1] * n
        shape[n - 1 - gate.qubits[0]] = 2
        return (t * d.reshape(shape)).reshape(-1)
    qa, qb = gate.qubits
    shape = [1] * n
    shape[n - 1 - qa] = 2
    shape[n - 1 - qb] = 2
    # d is indexed by 2*bit_a + bit_b; build the broadcastable block
    block = d.reshape(2, 2)
    if n - 1 - qa > n - 1 - qb:
        block = block.T
    return (t * block.reshape(shape)).reshape(-1)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits > state.n_qubits:
        raise ValidationError("circuit is wider than the register")
    for g in circuit.gates:
        apply_gate(state, g)
    return state


def apply_pauli_sum(state_amps: np.ndarray, obs: PauliSum) -> np.ndarray:
    """Matrix-free ``obs @ psi`` (also accepts a trailing batch axis)."""
    out = np.zeros_like(state_amps, dtype=complex)
    for t in obs.terms:
        out += t.weight * _kernels.apply_pauli_string(state_amps, t.ops, obs.n_qubits)
    return out


def expectation_pauli_sum(state: StateVector, obs: PauliSum) -> float:
    if obs.n_qubits != state.n_qubits:
        raise ValidationError(f"observable on {obs.n_qubits} qubits, state on {state.n_qubits}")
    psi = state.amplitudes
    if obs.is_diagonal:
        return float(np.dot(state.probabilities(), obs.diagonal()))
    val = np.vdot(psi, apply_pauli_sum(psi, obs))
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise NumericalError(f"expectation has imaginary part {val.imag:.3e}; observable not Hermitian?")
    return float(val.real)


def sample_indices(probabilities: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw basis indices i.i.d. from ``probabilities`` (normalised internally)."""
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    cdf = np.cumsum(probabilities)
    u = rng.random(shots) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def sample_bitstrings(state: StateVector, shots: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    idx = sample_indices(state.probabilities(), shots, rng)
    return [index_to_bits(int(i), state.n_qubits) for i in idx]


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.n_qubits != b.n_qubits:
        raise ValidationError("dimension mismatch")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def z_values(indices: np.ndarray, n_qubits: int) -> np.ndarray:
    """``z = +1`` for bit 0 and ``-1`` for bit 1, shape ``(len(indices), n_qubits)``."""
    q = np.arange(n_qubits)
    return 1 - 2 * ((np.asarray(indices)[:, None] >> q) & 1)
