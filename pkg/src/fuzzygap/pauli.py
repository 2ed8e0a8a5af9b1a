"""Weighted Pauli strings and their sums.

Qubit indexing is little-endian throughout: qubit ``q`` is bit ``q`` of a
computational-basis index.  In string labels qubit 0 is the *leftmost*
character, so ``"ZI"`` on two qubits is ``Z`` acting on qubit 0.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: (a, b) -> (phase, a*b)
_PRODUCT = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}

DENSE_MAX_QUBITS = 14


def _normalize_ops(ops: Mapping[int, str] | Iterable[tuple[int, str]]) -> tuple[tuple[int, str], ...]:
    items = ops.items() if isinstance(ops, Mapping) else ops
    out = {}
    for q, p in items:
        q = int(q)
        p = p.upper()
        if p not in ("X", "Y", "Z"):
            if p == "I":
                continue
            raise ValidationError(f"unknown Pauli {p!r}")
        if q < 0:
            raise ValidationError(f"negative qubit index {q}")
        if q in out:
            raise ValidationError(f"qubit {q} appears twice in a Pauli string")
        out[q] = p
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class PauliTerm:
    """``weight * P`` with ``P`` a tensor product of single-qubit Paulis."""

    weight: float
    ops: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", _normalize_ops(self.ops))
        if isinstance(self.weight, complex) or np.iscomplexobj(self.weight):
            raise ValidationError("Pauli weight must be real (Hermitian observables only)")
        if not np.isfinite(self.weight):
            raise ValidationError("Pauli weight must be finite")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for _, p in self.ops)

    def label(self, n_qubits: int) -> str:
        chars = ["I"] * n_qubits
        for q, p in self.ops:
            chars[q] = p
        return "".join(chars)

    @classmethod
    def from_label(cls, weight: float, label: str) -> "PauliTerm":
        return cls(weight, tuple((q, c) for q, c in enumerate(label) if c != "I"))


def pauli_product(a: tuple[tuple[int, str], ...], b: tuple[tuple[int, str], ...]):
    """Multiply two Pauli strings; returns ``(phase, ops)``."""
    phase = 1.0 + 0j
    out = dict(a)
    for q, p in b:
        if q not in out:
            out[q] = p
        elif out[q] == p:
            del out[q]
        else:
            ph, r = _PRODUCT[(out[q], p)]
            phase *= ph
            out[q] = r
    return phase, tuple(sorted(out.items()))


def strings_commute(a: tuple[tuple[int, str], ...], b: tuple[tuple[int, str], ...]) -> bool:
    da = dict(a)
    clashes = sum(1 for q, p in b if q in da and da[q] != p)
    return clashes % 2 == 0


class PauliSum:
    """A Hermitian operator ``sum_i c_i P_i`` on ``n_qubits`` qubits.

    Terms with identical Pauli strings are merged on construction and
    zero-weight terms are dropped.  Term order follows first appearance.
    """

    def __init__(self, n_qubits: int, terms: Iterable[PauliTerm] = ()):
        self.n_qubits = int(n_qubits)
        merged: dict[tuple, float] = {}
        for t in terms:
            for q in t.qubits:
                if q >= self.n_qubits:
                    raise ValidationError(f"qubit {q} out of range for {self.n_qubits} qubits")
            merged[t.ops] = merged.get(t.ops, 0.0) + float(t.weight)
        self.terms: tuple[PauliTerm, ...] = tuple(
            PauliTerm(w, ops) for ops, w in merged.items() if w != 0.0
        )

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, terms={len(self.terms)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.as_dict() == other.as_dict()

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValidationError("qubit count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(self.n_qubits, (PauliTerm(t.weight * factor, t.ops) for t in self.terms))

    def as_dict(self) -> dict[tuple, float]:
        return {t.ops: t.weight for t in self.terms}

    @property
    def is_diagonal(self) -> bool:
        return all(t.is_diagonal for t in self.terms)

    def terms_commute(self) -> bool:
        """True when every pair of terms commutes."""
        ts = self.terms
        return all(strings_commute(ts[i].ops, ts[j].ops) for i in range(len(ts)) for j in range(i))

    def commutator(self, other: "PauliSum") -> dict[tuple, complex]:
        """Symbolic ``[self, other]`` as a map Pauli string -> complex coefficient."""
        acc: dict[tuple, complex] = defaultdict(complex)
        for a in self.terms:
            for b in other.terms:
                if strings_commute(a.ops, b.ops):
                    continue
                phase, ops = pauli_product(a.ops, b.ops)
                acc[ops] += 2 * phase * a.weight * b.weight
        return {k: v for k, v in acc.items() if abs(v) > 1e-12}

    def commutes_with(self, other: "PauliSum") -> bool:
        return not self.commutator(other)

    def diagonal(self, basis: np.ndarray | None = None) -> np.ndarray:
        """Values of a diagonal operator on computational basis states.

        ``basis`` defaults to all ``2**n`` indices.
        """
        if not self.is_diagonal:
            raise ValidationError("operator is not diagonal in the computational basis")
        if basis is None:
            basis = np.arange(1 << self.n_qubits, dtype=np.int64)
        out = np.zeros(basis.shape, dtype=float)
        for t in self.terms:
            parity = np.zeros(basis.shape, dtype=np.int64)
            for q in t.qubits:
                parity ^= (basis >> q) & 1
            out += t.weight * (1 - 2 * parity)
        return out

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > DENSE_MAX_QUBITS:
            raise ValidationError(f"dense matrices limited to {DENSE_MAX_QUBITS} qubits")
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            ops = dict(t.ops)
            m = np.ones((1, 1), dtype=complex)
            for q in range(self.n_qubits - 1, -1, -1):
                m = np.kron(m, PAULI_MATRICES[ops.get(q, "I")])
            mat += t.weight * m
        return mat

    def to_json(self) -> list[dict]:
        return [{"weight": t.weight, "pauli": t.label(self.n_qubits)} for t in self.terms]

    @classmethod
    def from_json(cls, data: list[dict]) -> "PauliSum":
        if not data:
            raise ValidationError("cannot infer qubit count from an empty term list")
        n = len(data[0]["pauli"])
        return cls(n, (PauliTerm.from_label(d["weight"], d["pauli"]) for d in data))
