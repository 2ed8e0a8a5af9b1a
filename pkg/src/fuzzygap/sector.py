"""Fixed-Hamming-weight (total-Z) sectors.

Every Heisenberg bond ``XX + YY + ZZ = 2 SWAP - 1`` conserves the number of
ones in a basis state, so both the Trotter evolution and the Hamiltonian can
act on the ``C(n, w)`` states of a single sector.  A bond becomes an index
permutation on the sorted sector basis.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import ValidationError


@lru_cache(maxsize=64)
def _basis(n: int, w: int) -> np.ndarray:
    if w < 0 or w > n:
        return np.zeros(0, dtype=np.int64)
    if w == 0:
        return np.zeros(1, dtype=np.int64)
    if w == n:
        return np.array([(1 << n) - 1], dtype=np.int64)
    # top bit clear first, so the concatenation stays sorted
    lo = _basis(n - 1, w)
    hi = _basis(n - 1, w - 1) + (1 << (n - 1))
    return np.concatenate([lo, hi])


def sector_basis(n_qubits: int, weight: int) -> np.ndarray:
    """Sorted basis indices with exactly ``weight`` ones among ``n_qubits`` bits."""
    b = _basis(n_qubits, weight)
    b.flags.writeable = False
    return b


class Sector:
    def __init__(self, n_qubits: int, weight: int):
        if not 0 <= weight <= n_qubits:
            raise ValidationError(f"weight {weight} outside [0, {n_qubits}]")
        self.n_qubits = n_qubits
        self.weight = weight
        self.basis = sector_basis(n_qubits, weight)
        self._perms: dict[tuple[int, int], np.ndarray] = {}

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __repr__(self) -> str:
        return f"Sector(n_qubits={self.n_qubits}, weight={self.weight}, dim={self.dim})"

    def index_of(self, states: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.basis, states)

    def swap_permutation(self, q1: int, q2: int) -> np.ndarray:
        """Sector positions reached by exchanging bits ``q1`` and ``q2``."""
        key = (min(q1, q2), max(q1, q2))
        perm = self._perms.get(key)
        if perm is None:
            b = self.basis
            diff = ((b >> q1) ^ (b >> q2)) & 1
            swapped = b ^ ((diff << q1) | (diff << q2))
            dtype = np.int32 if self.dim < 2**31 else np.int64
            perm = self.index_of(swapped).astype(dtype)
            self._perms[key] = perm
        return perm

    def restrict(self, amplitudes: np.ndarray) -> np.ndarray:
        return amplitudes[self.basis]

    def embed(self, amps: np.ndarray) -> np.ndarray:
        full = np.zeros(1 << self.n_qubits, dtype=amps.dtype)
        full[self.basis] = amps
        return full

    def leakage(self, amplitudes: np.ndarray) -> float:
        """Probability carried outside this sector."""
        return float(max(0.0, np.sum(np.abs(amplitudes) ** 2) - np.sum(np.abs(amplitudes[self.basis]) ** 2)))

    def apply_heisenberg(self, amps: np.ndarray, alpha: float, q1: int, q2: int) -> np.ndarray:
        """In-place ``exp(-i alpha (XX+YY+ZZ))`` on bond ``(q1, q2)``."""
        a, b = _kernels.heisenberg_coefficients(alpha)
        _kernels.swap_mix_inplace(amps, self.swap_permutation(q1, q2), a, b)
        return amps

    def bond_operator(self, bonds):
        """Matrix-free real ``H`` for weighted bonds ``(q1, q2, w)``: returns ``matvec``."""
        perms = [(self.swap_permutation(q1, q2), float(w)) for q1, q2, w in bonds]

        def matvec(x: np.ndarray) -> np.ndarray:
            out = np.zeros_like(x)
            for perm, w in perms:
                _kernels.swap_apply_accumulate(out, x, perm, w)
            return out

        return matvec


def weight_of_state(amplitudes: np.ndarray, n_qubits: int, tol: float = 1e-14) -> int | None:
    """The unique Hamming weight carrying the state, or ``None`` if it spans several."""
    idx = np.nonzero(np.abs(amplitudes) ** 2 > tol)[0]
    if len(idx) == 0:
        return None
    w = np.unique(_kernels.popcount(idx))
    return int(w[0]) if len(w) == 1 else None
