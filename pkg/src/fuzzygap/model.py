"""The two-qubit-per-site ("Heisenberg comb") sigma-model Hamiltonian and dipole operators.

Site ``l`` owns the head qubit ``2l`` and the fuzz qubit ``2l + 1``.  Each head
is coupled to its own fuzz (kinetic bonds, weight ``eta g^2 / 2``) and to the
next head on a periodic ring (potential bonds, weight ``eta / (3 g^2)``); every
bond is an isotropic ``XX + YY + ZZ`` coupling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

from .errors import ValidationError
from .pauli import PauliSum, PauliTerm


@dataclass(frozen=True)
class ModelParams:
    """Lattice, coupling and run parameters, all in lattice units."""

    L: int
    g: float
    eta: float = 1.0
    lam: float = 1.0
    t_prep: float = 0.1
    dt: float = 0.4
    n_steps: int = 13
    shots: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.L) != self.L or self.L < 3:
            raise ValidationError(f"L must be an integer >= 3, got {self.L}")
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValidationError(f"g must be positive, got {self.g}")
        if not math.isfinite(self.eta):
            raise ValidationError("eta must be finite")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.t_prep < 0:
            raise ValidationError("t_prep must be non-negative")
        if self.n_steps < 0:
            raise ValidationError("n_steps must be non-negative")
        if self.shots < 0:
            raise ValidationError("shots must be non-negative")

    @property
    def n_qubits(self) -> int:
        return 2 * self.L

    @property
    def kinetic_weight(self) -> float:
        return self.eta * self.g**2 / 2

    @property
    def potential_weight(self) -> float:
        return self.eta / (3 * self.g**2)

    def to_dict(self) -> dict:
        return asdict(self)


class Bond(NamedTuple):
    kind: str  # "kinetic" | "potential"
    site: int
    q1: int
    q2: int
    weight: float


def head(l: int) -> int:
    return 2 * l


def fuzz(l: int) -> int:
    return 2 * l + 1


def kinetic_bonds(p: ModelParams) -> list[Bond]:
    return [Bond("kinetic", l, fuzz(l), head(l), p.kinetic_weight) for l in range(p.L)]


def potential_bonds(p: ModelParams) -> list[Bond]:
    n = p.n_qubits
    return [Bond("potential", l, (head(l) + 2) % n, head(l), p.potential_weight) for l in range(p.L)]


def bonds_hamiltonian(n_qubits: int, bonds) -> PauliSum:
    terms = []
    for b in bonds:
        for P in "XYZ":
            terms.append(PauliTerm(b.weight, ((b.q1, P), (b.q2, P))))
    return PauliSum(n_qubits, terms)


def build_hamiltonian(p: ModelParams) -> PauliSum:
    """``eta g^2/2 sum_l S(2l+1, 2l) + eta/(3 g^2) sum_l S(2l+2, 2l)``, ``S = XX+YY+ZZ``.

    No identity offset is included.  ``L < 3`` is rejected because the
    periodic head ring would then double-count a bond.
    """
    if p.L < 3:
        raise ValidationError("L must be >= 3")
    return bonds_hamiltonian(p.n_qubits, kinetic_bonds(p) + potential_bonds(p))


def dipole(L: int, lam: float = 1.0) -> PauliSum:
    """``d(lam) = sum_l (-1)^l [Z_{2l+1} - lam Z_{2l}]``.

    ``lam = 1`` is the strong-coupling dipole, ``lam = 0`` the weak one.
    Defined for any ``L >= 1`` (no ring structure is involved).
    """
    if L < 1:
        raise ValidationError("L must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    terms = []
    for l in range(L):
        sign = -1.0 if l % 2 else 1.0
        terms.append(PauliTerm(sign, ((fuzz(l), "Z"),)))
        terms.append(PauliTerm(-lam * sign, ((head(l), "Z"),)))
    return PauliSum(2 * L, terms)


def total_z(n_qubits: int) -> PauliSum:
    return PauliSum(n_qubits, (PauliTerm(1.0, ((q, "Z"),)) for q in range(n_qubits)))


def translate(op: PauliSum, sites: int = 1) -> PauliSum:
    """Relabel site ``l -> l + sites`` (mod L) on a two-qubit-per-site register."""
    n = op.n_qubits
    shift = 2 * sites
    return PauliSum(n, (PauliTerm(t.weight, tuple(((q + shift) % n, P) for q, P in t.ops)) for t in op.terms))
