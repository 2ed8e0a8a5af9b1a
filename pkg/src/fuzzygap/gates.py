"""Small circuit IR, native-gate-set lowering and resource accounting.

Two-qubit gate matrices are written in the basis ``|q_a q_b>`` where ``q_a`` is
the first listed qubit (most significant).  ``CNOT`` lists ``(control, target)``.
Circuit identities are checked up to a global phase.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError

ONE_QUBIT = ("X", "Y", "Z", "H", "S", "Sdg", "Rz", "Ry")
TWO_QUBIT = ("CNOT", "Rzz", "HeisenbergExp")
ROTATIONS = ("Rz", "Ry", "Rzz", "HeisenbergExp")
KINDS = ONE_QUBIT + TWO_QUBIT

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind not in KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in ONE_QUBIT else 2
        if len(self.qubits) != arity:
            raise ValidationError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValidationError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValidationError("negative qubit index")
        if self.kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValidationError(f"{self.kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValidationError(f"{self.kind} takes no angle")

    def matrix(self) -> np.ndarray:
        k, th = self.kind, self.angle
        if k in _FIXED:
            return _FIXED[k]
        if k == "Rz":
            return np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)])
        if k == "Ry":
            c, s = math.cos(th / 2), math.sin(th / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if k == "Rzz":
            a, b = np.exp(-0.5j * th), np.exp(0.5j * th)
            return np.diag([a, b, b, a])
        # HeisenbergExp: a*1 + b*SWAP
        a, b = _kernels.heisenberg_coefficients(th)
        return np.array([[a + b, 0, 0, 0], [0, a, b, 0], [0, b, a, 0], [0, 0, 0, a + b]], dtype=complex)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.angle is not None:
            d["angle"] = self.angle
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        return cls(d["kind"], tuple(d["qubits"]), d.get("angle"))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValidationError(f"{g} exceeds {self.n_qubits} qubits")

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.n_qubits, other.n_qubits), self.gates + other.gates)

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "gates": [g.to_json() for g in self.gates]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        return cls(d["n_qubits"], tuple(Gate.from_json(g) for g in d["gates"]))


@dataclass(frozen=True)
class GateSet:
    """Allowed gate kinds plus an optional bound on ``|theta|`` for ``Rzz``."""

    name: str
    allowed: frozenset
    rzz_max_angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "allowed", frozenset(self.allowed))
        if not self.allowed:
            raise ValidationError("gate set must allow at least one kind")
        if not self.allowed & set(TWO_QUBIT):
            raise ValidationError(f"gate set {self.name!r} has no entangling gate")

    def admits(self, g: Gate) -> bool:
        if g.kind not in self.allowed:
            return False
        if g.kind == "Rzz" and self.rzz_max_angle is not None:
            return abs(g.angle) <= self.rzz_max_angle + 1e-12
        return True


_SINGLE = {"X", "Y", "Z", "H", "S", "Sdg", "Rz", "Ry"}
CNOT_ROTATIONS = GateSet("cnot_rotations", _SINGLE | {"CNOT"})
RZZ_NATIVE = GateSet("rzz_native", _SINGLE | {"Rzz"})
RZZ_FRACTIONAL = GateSet("rzz_fractional", _SINGLE | {"Rzz", "CNOT"}, rzz_max_angle=math.pi / 2)
FUSED = GateSet("fused", _SINGLE | {"CNOT", "Rzz", "HeisenbergExp"})
GATESETS = {gs.name: gs for gs in (CNOT_ROTATIONS, RZZ_NATIVE, RZZ_FRACTIONAL, FUSED)}


# ---------------------------------------------------------------------------
# circuit builders


def singlet_pair(q_head: int, q_fuzz: int, n_qubits: int) -> Circuit:
    """``(|0_f 1_h> - |1_f 0_h>)/sqrt 2`` from ``|00>``: X both, H on fuzz, CNOT fuzz->head."""
    return Circuit(
        n_qubits,
        (
            Gate("X", (q_head,)),
            Gate("X", (q_fuzz,)),
            Gate("H", (q_fuzz,)),
            Gate("CNOT", (q_fuzz, q_head)),
        ),
    )


def heisenberg_block(alpha: float, q_head: int, q_fuzz: int, n_qubits: int | None = None) -> Circuit:
    """Nine-gate CNOT/rotation circuit for ``exp[-i alpha (XX + YY + ZZ)]``.

    ``q_head`` plays the role of the upper wire ``k`` of the standard
    three-CNOT construction, ``q_fuzz`` the lower wire ``l``.
    """
    k, l = q_head, q_fuzz
    if k == l:
        raise ValidationError("heisenberg_block needs distinct qubits")
    n = n_qubits if n_qubits is not None else max(k, l) + 1
    half_pi = math.pi / 2
    return Circuit(
        n,
        (
            Gate("CNOT", (k, l)),
            Gate("Rz", (k,), half_pi),
            Gate("CNOT", (l, k)),
            Gate("Ry", (k,), -2 * alpha),
            Gate("CNOT", (l, k)),
            Gate("Ry", (k,), 2 * alpha),
            Gate("Rz", (l,), 2 * alpha),
            Gate("Rz", (k,), -half_pi),
            Gate("CNOT", (k, l)),
        ),
    )


def pauli_pair_rotation(axis: str, theta: float, q1: int, q2: int, n_qubits: int | None = None) -> Circuit:
    """``exp(-i theta P P / 2)`` for ``P`` in ``{X, Y, Z}`` built around one ``Rzz``.

    Uses ``X = H Z H`` and ``Y = S H Z H S^dagger`` on both qubits.
    """
    if q1 == q2:
        raise ValidationError("pauli_pair_rotation needs distinct qubits")
    n = n_qubits if n_qubits is not None else max(q1, q2) + 1
    axis = axis.upper()
    core = Gate("Rzz", (q1, q2), theta)
    if axis == "ZZ":
        gates = [core]
    elif axis == "XX":
        gates = [Gate("H", (q1,)), Gate("H", (q2,)), core, Gate("H", (q1,)), Gate("H", (q2,))]
    elif axis == "YY":
        pre = [Gate("Sdg", (q,)) for q in (q1, q2)] + [Gate("H", (q,)) for q in (q1, q2)]
        post = [Gate("H", (q,)) for q in (q1, q2)] + [Gate("S", (q,)) for q in (q1, q2)]
        gates = pre + [core] + post
    else:
        raise ValidationError(f"axis must be XX, YY or ZZ, got {axis!r}")
    return Circuit(n, tuple(gates))


# ---------------------------------------------------------------------------
# lowering


def _lower_once(g: Gate, gs: GateSet) -> list[Gate] | None:
    """One rewrite step for a gate the set does not admit; ``None`` if impossible."""
    k = g.kind
    if k == "HeisenbergExp":
        q1, q2 = g.qubits
        if "CNOT" in gs.allowed and {"Rz", "Ry"} <= gs.allowed:
            return list(heisenberg_block(g.angle, q1, q2).gates)
        if "Rzz" in gs.allowed:
            out = []
            for axis in ("XX", "YY", "ZZ"):
                out += pauli_pair_rotation(axis, 2 * g.angle, q1, q2).gates
            return out
        return None
    if k == "Rzz":
        if "Rzz" in gs.allowed and gs.rzz_max_angle is not None:
            pieces = math.ceil(abs(g.angle) / gs.rzz_max_angle - 1e-12)
            return [Gate("Rzz", g.qubits, g.angle / pieces)] * pieces
        if "CNOT" in gs.allowed and "Rz" in gs.allowed:
            c, t = g.qubits
            return [Gate("CNOT", (c, t)), Gate("Rz", (t,), g.angle), Gate("CNOT", (c, t))]
        return None
    if k == "CNOT":
        if "Rzz" in gs.allowed and {"H", "Rz"} <= gs.allowed:
            c, t = g.qubits
            # CZ ~ Rzz(-pi/2) Rz(pi/2) Rz(pi/2) up to phase
            return [
                Gate("H", (t,)),
                Gate("Rzz", (c, t), -math.pi / 2),
                Gate("Rz", (c,), math.pi / 2),
                Gate("Rz", (t,), math.pi / 2),
                Gate("H", (t,)),
            ]
        return None
    if k in ("S", "Sdg", "Z") and "Rz" in gs.allowed:
        return [Gate("Rz", g.qubits, {"S": math.pi / 2, "Sdg": -math.pi / 2, "Z": math.pi}[k])]
    if k == "X" and "H" in gs.allowed and "Rz" in gs.allowed:
        return [Gate("H", g.qubits), Gate("Rz", g.qubits, math.pi), Gate("H", g.qubits)]
    if k == "Y" and "Ry" in gs.allowed:
        return [Gate("Ry", g.qubits, math.pi)]  # Y = i Ry(pi)
    return None


def lower_to_gateset(c: Circuit, gs: GateSet, max_depth: int = 8) -> Circuit:
    """Rewrite every gate until ``gs`` admits it.

    Already-admitted gates are passed through untouched, so lowering is
    idempotent.
    """
    out: list[Gate] = []
    stack = [(g, 0) for g in reversed(c.gates)]
    while stack:
        g, depth = stack.pop()
        if gs.admits(g):
            out.append(g)
            continue
        rewritten = _lower_once(g, gs) if depth < max_depth else None
        if rewritten is None:
            raise ValidationError(f"cannot lower {g.kind} to gate set {gs.name!r}")
        stack.extend((r, depth + 1) for r in reversed(rewritten))
    return Circuit(c.n_qubits, tuple(out))


# ---------------------------------------------------------------------------
# accounting and dense checks


@dataclass
class Resources:
    counts: dict = field(default_factory=dict)
    two_qubit_depth: int = 0

    @property
    def two_qubit_count(self) -> int:
        return sum(v for k, v in self.counts.items() if k in TWO_QUBIT)

    def to_json(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "two_qubit_depth": self.two_qubit_depth}


def resource_count(c: Circuit) -> Resources:
    """Gate counts per kind and greedy two-qubit layering depth."""
    counts = Counter(g.kind for g in c.gates)
    level = [0] * c.n_qubits
    depth = 0
    for g in c.gates:
        if len(g.qubits) != 2:
            continue
        d = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = d
        depth = max(depth, d)
    return Resources(dict(counts), depth)


def circuit_unitary(c: Circuit, max_qubits: int = 10) -> np.ndarray:
    """Dense matrix of ``c`` (little-endian basis ordering)."""
    if c.n_qubits > max_qubits:
        raise ValidationError(f"dense unitary limited to {max_qubits} qubits")
    n = c.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for g in c.gates:
        u = _kernels.apply_matrix(u, g.matrix(), g.qubits, n)
    return u


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi ||a - e^{i phi} b||_F``."""
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b))
