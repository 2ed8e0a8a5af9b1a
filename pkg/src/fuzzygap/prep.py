"""Initial states: singlet product, antiferro x antiferro, and the dipole kick."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gates import Circuit, Gate, singlet_pair
from .model import fuzz, head
from .pauli import PauliSum, PauliTerm
from .sector import Sector
from .statevec import StateVector, apply_circuit


@dataclass(frozen=True)
class PrepSpec:
    mode: str  # "strong" | "weak"
    t_prep: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        if self.mode not in ("strong", "weak"):
            raise ValidationError(f"prep mode must be 'strong' or 'weak', got {self.mode!r}")
        if self.t_prep < 0:
            raise ValidationError("t_prep must be non-negative")


def strong_ground_circuit(L: int) -> Circuit:
    """Product of per-site singlets ``(|0_f 1_h> - |1_f 0_h>)/sqrt 2``."""
    if L < 1:
        raise ValidationError("L must be >= 1")
    c = Circuit(2 * L)
    for l in range(L):
        c = c + singlet_pair(head(l), fuzz(l), 2 * L)
    return c


def strong_ground_state(L: int) -> StateVector:
    return apply_circuit(StateVector(2 * L), strong_ground_circuit(L))


def strong_ground_sector(L: int) -> tuple[Sector, np.ndarray]:
    """The singlet product restricted to its weight-``L`` sector (built directly)."""
    sec = Sector(2 * L, L)
    b = sec.basis
    amp = np.ones(sec.dim)
    for l in range(L):
        h = (b >> head(l)) & 1
        f = (b >> fuzz(l)) & 1
        amp *= np.where(h == f, 0.0, np.where(f == 0, 1.0, -1.0))
    return sec, amp.astype(complex) / 2 ** (L / 2)


def heisenberg_ring(L: int) -> PauliSum:
    """``sum_i (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1})`` on a periodic ``L``-site ring."""
    terms = []
    for i in range(L):
        j = (i + 1) % L
        for P in "XYZ":
            terms.append(PauliTerm(1.0, ((i, P), (j, P))))
    return PauliSum(L, terms)


def heisenberg_ring_ground_state(L: int) -> tuple[float, np.ndarray]:
    """Ground energy and real ground state (``2**L`` amplitudes) of the periodic ring.

    The overall sign is fixed so the largest-magnitude amplitude is positive.
    """
    if L < 4 or L % 2:
        raise ValidationError(f"antiferro ring needs even L >= 4, got {L}")
    from .oracle import sector_ground_state

    sec = Sector(L, L // 2)
    bonds = [(i, (i + 1) % L, 1.0) for i in range(L)]
    energy, vec = sector_ground_state(sec, bonds)
    vec = vec / np.linalg.norm(vec)
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    full = np.zeros(1 << L)
    full[sec.basis] = vec
    return energy, full


def _spread_bits(x: np.ndarray) -> np.ndarray:
    """Move bit ``l`` of ``x`` to bit ``2l``."""
    out = np.zeros_like(x)
    for l in range(int(x.max()).bit_length() if len(x) else 0):
        out |= ((x >> l) & 1) << (2 * l)
    return out


def weak_ground_parts(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Full-register indices and amplitudes of ``|antiferro>_heads x |antiferro>_fuzz``."""
    _, ring = heisenberg_ring_ground_state(L)
    nz = np.nonzero(ring)[0].astype(np.int64)
    amp = ring[nz]
    hs = _spread_bits(nz)
    idx = (hs[:, None] | (hs[None, :] << 1)).ravel()  # heads on even, fuzz on odd qubits
    vals = np.outer(amp, amp).ravel()
    return idx, vals


def weak_ground_state(L: int) -> StateVector:
    idx, vals = weak_ground_parts(L)
    amps = np.zeros(1 << (2 * L), dtype=complex)
    amps[idx] = vals
    return StateVector(2 * L, amps)


def weak_ground_sector(L: int) -> tuple[Sector, np.ndarray]:
    idx, vals = weak_ground_parts(L)
    sec = Sector(2 * L, L)
    amps = np.zeros(sec.dim, dtype=complex)
    amps[sec.index_of(idx)] = vals
    return sec, amps


def _check_kick_operator(d: PauliSum) -> None:
    if not d.is_diagonal:
        raise ValidationError("kick generator must be diagonal (commuting Z strings)")


def kick_circuit(d: PauliSum, t_prep: float) -> Circuit:
    """``exp(-i d t)`` for a sum of single-qubit ``Z`` terms as ``Rz(2 w t)`` gates."""
    _check_kick_operator(d)
    gates = []
    for t in d.terms:
        if len(t.ops) != 1:
            raise ValidationError("kick_circuit handles single-qubit Z terms only")
        gates.append(Gate("Rz", t.qubits, 2 * t.weight * t_prep))
    return Circuit(d.n_qubits, tuple(gates))


def kick(state: StateVector, d: PauliSum, t_prep: float) -> StateVector:
    """Apply ``exp(-i d t_prep)`` exactly (``d`` diagonal, so no splitting error)."""
    _check_kick_operator(d)
    if d.n_qubits != state.n_qubits:
        raise ValidationError("kick operator and state differ in qubit count")
    if t_prep == 0:
        return state
    if all(len(t.ops) == 1 for t in d.terms):
        return apply_circuit(state, kick_circuit(d, t_prep))
    state.amplitudes = state.amplitudes * np.exp(-1j * t_prep * d.diagonal())
    return state


def kick_sector(sec: Sector, amps: np.ndarray, d: PauliSum, t_prep: float) -> np.ndarray:
    _check_kick_operator(d)
    return amps * np.exp(-1j * t_prep * d.diagonal(sec.basis))


def prepare(spec: PrepSpec, L: int, d: PauliSum) -> StateVector:
    state = strong_ground_state(L) if spec.mode == "strong" else weak_ground_state(L)
    return kick(state, d, spec.t_prep)


def prepare_sector(spec: PrepSpec, L: int, d: PauliSum) -> tuple[Sector, np.ndarray]:
    sec, amps = strong_ground_sector(L) if spec.mode == "strong" else weak_ground_sector(L)
    return sec, kick_sector(sec, amps, d, spec.t_prep)
