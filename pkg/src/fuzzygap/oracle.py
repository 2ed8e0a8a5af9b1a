"""Matrix-free exact diagonalisation: low-lying spectrum, mass gap, overlaps.

The eigensolver is a thick-restart Lanczos iteration with full
reorthogonalisation.  A single Krylov vector cannot resolve exactly
degenerate levels, so degeneracies are obtained by diagonalising every
total-Z sector separately and merging the spectra (the Hamiltonians here
conserve total Z).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ValidationError
from .model import total_z
from .pauli import PauliSum
from .sector import Sector
from .statevec import StateVector, apply_pauli_sum

DEGENERACY_TOL = 1e-8
DENSE_SECTOR_DIM = 1500
MAX_QUBITS = 26


@dataclass
class LanczosResult:
    values: np.ndarray
    vectors: np.ndarray  # columns
    residuals: np.ndarray
    iterations: int


def lanczos(matvec, dim: int, k: int, *, tol: float = 1e-10, basis_size: int | None = None,
            max_restarts: int = 500, seed: int = 1234, dtype=float, v0=None) -> LanczosResult:
    """``k`` lowest eigenpairs of a real-symmetric/Hermitian operator given by ``matvec``.

    Converged when every wanted Ritz residual ``||A y - theta y||`` is below
    ``tol * max(1, |theta|)``.
    """
    if k < 1 or k > dim:
        raise ValidationError(f"cannot request {k} eigenpairs of a {dim}-dimensional operator")
    m = basis_size or min(dim, max(2 * k + 20, 40))
    m = min(m, dim)
    keep = min(m - 1, k + max(4, k))  # Ritz vectors carried over a restart

    rng = np.random.default_rng(seed)
    V = np.zeros((m + 1, dim), dtype=dtype)
    T = np.zeros((m + 1, m + 1))
    v = rng.standard_normal(dim).astype(dtype) if v0 is None else np.asarray(v0, dtype=dtype).copy()
    if dtype is complex and v0 is None:
        v = v + 1j * rng.standard_normal(dim)
    V[0] = v / np.linalg.norm(v)
    start = 0
    n_matvec = 0
    for _ in range(max_restarts):
        beta = 0.0
        j_end = m
        for j in range(start, m):
            w = matvec(V[j])
            n_matvec += 1
            h = V[: j + 1].conj() @ w
            w = w - V[: j + 1].T @ h
            h2 = V[: j + 1].conj() @ w  # second Gram-Schmidt pass
            w = w - V[: j + 1].T @ h2
            h = (h + h2).real
            T[: j + 1, j] = h
            T[j, : j + 1] = h
            beta = float(np.linalg.norm(w))
            if beta < 1e-13 * max(1.0, abs(T[j, j])):
                j_end = j + 1  # invariant subspace
                break
            V[j + 1] = w / beta
            T[j + 1, j] = T[j, j + 1] = beta
        else:
            j_end = m
        size = j_end
        theta, Y = np.linalg.eigh(T[:size, :size])
        if beta < 1e-13 or size == dim:
            res = np.zeros(size)
        else:
            res = np.abs(beta * Y[size - 1, :])
        want = min(k, size)
        if np.all(res[:want] <= tol * np.maximum(1.0, np.abs(theta[:want]))):
            vecs = (V[:size].T @ Y[:, :want])
            return LanczosResult(theta[:want], vecs, res[:want], n_matvec)
        if size < m:  # invariant subspace smaller than requested
            raise ConvergenceError("Krylov space exhausted before convergence")
        # thick restart: keep the lowest Ritz vectors plus the residual direction
        p = keep
        Vnew = Y[:, :p].T @ V[:size]
        resid = V[size].copy()
        V[:p] = Vnew
        V[p] = resid
        T[:] = 0.0
        T[np.arange(p), np.arange(p)] = theta[:p]
        T[p, :p] = T[:p, p] = beta * Y[size - 1, :p]
        # column p is recomputed from scratch on the next pass
        start = p
    raise ConvergenceError(
        f"Lanczos did not converge after {max_restarts} restarts; residuals {res[:k]}"
    )


# ---------------------------------------------------------------------------


def bond_form(H: PauliSum):
    """``[(q1, q2, w), ...]`` if ``H = sum w (XX+YY+ZZ)`` over pairs, else ``None``."""
    pairs: dict[tuple[int, int], dict[str, float]] = defaultdict(dict)
    for t in H.terms:
        if len(t.ops) != 2 or t.ops[0][1] != t.ops[1][1]:
            return None
        pairs[(t.ops[0][0], t.ops[1][0])][t.ops[0][1]] = t.weight
    out = []
    for (q1, q2), ws in pairs.items():
        if set(ws) != {"X", "Y", "Z"} or not (ws["X"] == ws["Y"] == ws["Z"]):
            return None
        out.append((q1, q2, ws["X"]))
    return out


def _sector_operator(H: PauliSum, sec: Sector):
    bonds = bond_form(H)
    if bonds is not None:
        return sec.bond_operator(bonds), float

    def matvec(x):
        return sec.restrict(apply_pauli_sum(sec.embed(x.astype(complex)), H))

    return matvec, complex


def _dense_from_matvec(matvec, dim: int, dtype) -> np.ndarray:
    eye = np.eye(dim, dtype=dtype)
    return np.column_stack([matvec(eye[:, i]) for i in range(dim)])


def sector_eigenpairs(matvec, dim: int, k: int, dtype=float, method: str = "auto", tol: float = 1e-10):
    k = min(k, dim)
    if method == "dense" or (method == "auto" and dim <= DENSE_SECTOR_DIM):
        A = _dense_from_matvec(matvec, dim, dtype)
        w, v = np.linalg.eigh((A + A.conj().T) / 2)
        Av = A @ v[:, :k]
        res = np.linalg.norm(Av - v[:, :k] * w[:k], axis=0)
        return w[:k], v[:, :k], res
    r = lanczos(matvec, dim, k, dtype=dtype, tol=tol)
    return r.values, r.vectors, r.residuals


def sector_ground_state(sec: Sector, bonds) -> tuple[float, np.ndarray]:
    w, v, _ = sector_eigenpairs(sec.bond_operator(bonds), sec.dim, 1)
    return float(w[0]), v[:, 0]


@dataclass
class SpectrumResult:
    energies: np.ndarray
    degeneracies: list[int]
    levels: list[float]
    gap: float
    residuals: np.ndarray
    sectors: list[int] = field(default_factory=list)  # Hamming weight of each energy
    states: list[np.ndarray] | None = None  # full-register vectors, if retained
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "energies": [float(e) for e in self.energies],
            "levels": [float(e) for e in self.levels],
            "degeneracies": list(self.degeneracies),
            "gap": float(self.gap),
            "residuals": [float(r) for r in self.residuals],
            "sectors": list(self.sectors),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def cluster_levels(energies: np.ndarray, tol: float = DEGENERACY_TOL) -> tuple[list[float], list[int]]:
    levels: list[float] = []
    counts: list[int] = []
    for e in np.sort(energies):
        if levels and abs(e - levels[-1]) <= tol:
            counts[-1] += 1
        else:
            levels.append(float(e))
            counts.append(1)
    return levels, counts


def conserves_total_z(H: PauliSum) -> bool:
    return bond_form(H) is not None or H.commutes_with(total_z(H.n_qubits))


def lowest_eigenpairs(H: PauliSum, k: int = 5, sector: int | None = None, *, retain_states: bool = False,
                      method: str = "auto", tol: float = 1e-10) -> SpectrumResult:
    """``k`` lowest eigenvalues of ``H``, optionally restricted to a total-Z sector.

    ``sector`` is the Hamming weight of the basis states (``n_qubits // 2`` is
    total Z = 0).  With ``sector=None`` every sector is diagonalised and the
    spectra merged, which resolves multiplicities exactly.
    """
    n = H.n_qubits
    if k < 2:
        raise ValidationError("k must be >= 2 to define a gap")
    if n > MAX_QUBITS:
        raise ValidationError(f"{n} qubits exceeds the oracle limit of {MAX_QUBITS}")
    if not conserves_total_z(H):
        raise ValidationError("Hamiltonian does not conserve total Z; sector decomposition unavailable")
    weights = [sector] if sector is not None else list(range(n + 1))
    energies, res, secs, states = [], [], [], []
    for w in weights:
        sec = Sector(n, w)
        mv, dtype = _sector_operator(H, sec)
        vals, vecs, r = sector_eigenpairs(mv, sec.dim, k, dtype=dtype, method=method, tol=tol)
        energies.extend(vals)
        res.extend(r)
        secs.extend([w] * len(vals))
        if retain_states:
            states.extend(sec.embed(vecs[:, i].astype(complex)) for i in range(len(vals)))
    order = np.argsort(energies, kind="stable")[:k] if sector is None else np.argsort(energies, kind="stable")
    energies = np.asarray(energies)[order]
    levels, degens = cluster_levels(energies)
    if len(levels) < 2:
        raise ConvergenceError(f"only one distinct level among {len(energies)} energies; raise k")
    return SpectrumResult(
        energies=energies,
        degeneracies=degens,
        levels=levels,
        gap=levels[1] - levels[0],
        residuals=np.asarray(res)[order],
        sectors=[secs[i] for i in order],
        states=[states[i] for i in order] if retain_states else None,
    )


def mass_gap(H: PauliSum, sector: int | None = None, k: int = 4) -> float:
    """``E1 - E0``; by default from the total-Z = 0 sector, which holds both the
    singlet ground state and the zero component of the triplet."""
    if sector is None:
        sector = H.n_qubits // 2
    return lowest_eigenpairs(H, k=k, sector=sector).gap


def ground_state(H: PauliSum, sector: int | None = None) -> tuple[float, np.ndarray]:
    """Ground energy and full-register ground vector.

    Without a sector the lowest energy over all sectors is used.
    """
    n = H.n_qubits
    weights = [sector] if sector is not None else range(n + 1)
    best = None
    for w in weights:
        sec = Sector(n, w)
        mv, dtype = _sector_operator(H, sec)
        vals, vecs, _ = sector_eigenpairs(mv, sec.dim, 1, dtype=dtype)
        if best is None or vals[0] < best[0] - DEGENERACY_TOL:
            best = (float(vals[0]), sec.embed(vecs[:, 0].astype(complex)))
    return best


def overlap_with_ground(state: StateVector, H: PauliSum, sector: int | None = None) -> float:
    """``|<state|E0>|^2`` with ``E0`` the (non-degenerate) ground state of ``H``."""
    if state.n_qubits != H.n_qubits:
        raise ValidationError("state and Hamiltonian differ in qubit count")
    _, g = ground_state(H, sector)
    ov = np.vdot(g, state.amplitudes) / (np.linalg.norm(g) * state.norm())
    return float(min(1.0, abs(ov) ** 2))
