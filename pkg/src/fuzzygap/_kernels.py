"""Low-level amplitude kernels.

Arrays are flat ``2**n`` (optionally with one trailing batch axis).  In the
C-ordered ``(2,)*n`` tensor view, qubit ``q`` lives on axis ``n - 1 - q``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def apply_matrix(psi: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a ``2**k x 2**k`` matrix to ``qubits`` (first qubit = most significant row bit).

    Returns a new array with the same shape as ``psi``.
    """
    k = len(qubits)
    batch = psi.shape[1:]
    t = psi.reshape((2,) * n + batch)
    axes = [_axis(n, q) for q in qubits]
    t = np.moveaxis(t, axes, list(range(k)))
    shape = t.shape
    t = (mat @ t.reshape(1 << k, -1)).reshape(shape)
    t = np.moveaxis(t, list(range(k)), axes)
    return np.ascontiguousarray(t).reshape(psi.shape)


def apply_pauli_string(psi: np.ndarray, ops, n: int) -> np.ndarray:
    """Return ``P psi`` for a Pauli string given as ``((qubit, 'X'|'Y'|'Z'), ...)``."""
    batch = psi.shape[1:]
    t = psi.reshape((2,) * n + batch)
    extra = (1,) * len(batch)
    for q, p in ops:
        ax = _axis(n, q)
        shape = [1] * n
        shape[ax] = 2
        shape = tuple(shape) + extra
        if p == "X":
            t = np.flip(t, axis=ax)
        elif p == "Z":
            t = t * np.array([1.0, -1.0]).reshape(shape)
        else:  # Y
            t = np.flip(t, axis=ax) * np.array([-1j, 1j]).reshape(shape)
    return np.ascontiguousarray(t).reshape(psi.shape)


def swap_qubits(psi: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    batch = psi.shape[1:]
    t = psi.reshape((2,) * n + batch)
    t = np.swapaxes(t, _axis(n, q1), _axis(n, q2))
    return np.ascontiguousarray(t).reshape(psi.shape)


def heisenberg_coefficients(alpha: float) -> tuple[complex, complex]:
    """``exp(-i alpha (XX+YY+ZZ)) = a * 1 + b * SWAP``.

    Uses ``XX + YY + ZZ = 2 SWAP - 1``.
    """
    ph = np.exp(1j * alpha)
    return complex(ph * np.cos(2 * alpha)), complex(-1j * ph * np.sin(2 * alpha))


def apply_heisenberg(psi: np.ndarray, alpha: float, q1: int, q2: int, n: int) -> np.ndarray:
    a, b = heisenberg_coefficients(alpha)
    return a * psi + b * swap_qubits(psi, q1, q2, n)


@njit(cache=True)
def swap_mix_inplace(psi, perm, a, b):
    """``psi <- a psi + b psi[perm]`` for an involutive ``perm``, in place."""
    for i in range(psi.shape[0]):
        j = perm[i]
        if j > i:
            x = psi[i]
            y = psi[j]
            psi[i] = a * x + b * y
            psi[j] = a * y + b * x
        elif j == i:
            psi[i] = (a + b) * psi[i]


@njit(cache=True)
def swap_apply_accumulate(out, psi, perm, weight):
    """``out += weight * (2 psi[perm] - psi)`` - one Heisenberg bond of ``H psi``."""
    for i in range(psi.shape[0]):
        out[i] += weight * (2.0 * psi[perm[i]] - psi[i])
    return out


def popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    c = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        c += (x & np.uint64(1)).astype(np.int64)
        x = x >> np.uint64(1)
    return c
