"""First-order Trotter evolution, exact-evolution oracle and time-series records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import __version__
from .errors import ConvergenceError, ValidationError
from .gates import CNOT_ROTATIONS, Circuit, Gate, GateSet, lower_to_gateset
from .model import Bond, ModelParams, kinetic_bonds, potential_bonds
from .oracle import bond_form
from .pauli import PauliSum
from .sector import Sector, weight_of_state
from .statevec import (
    StateVector,
    apply_circuit,
    apply_pauli_sum,
    expectation_pauli_sum,
    sample_indices,
)

ORDERINGS = ("natural", "even_odd")
DENSE_EXACT_QUBITS = 14


# ---------------------------------------------------------------------------
# Trotter plans


@dataclass(frozen=True)
class TrotterPlan:
    """Bond order for one first-order Trotter step.

    ``natural``: kinetic bonds ``l = 0..L-1`` then potential bonds
    ``l = 0..L-1``.  ``even_odd``: kinetic bonds, then potential bonds in
    disjoint even/odd sublayers (a third sublayer holds the wrap bond when
    ``L`` is odd).
    """

    dt: float
    bonds: tuple[Bond, ...]
    ordering: str = "natural"
    fused: bool = True
    gateset: GateSet | None = None

    def alphas(self) -> list[float]:
        return [b.weight * self.dt for b in self.bonds]


def make_plan(p: ModelParams, ordering: str = "natural", fused: bool = True, dt: float | None = None,
              gateset: GateSet | None = None) -> TrotterPlan:
    if ordering not in ORDERINGS:
        raise ValidationError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    kin = kinetic_bonds(p)
    pot = potential_bonds(p)
    if ordering == "even_odd":
        even = [b for b in pot if b.site % 2 == 0 and not (p.L % 2 and b.site == p.L - 1)]
        odd = [b for b in pot if b.site % 2 == 1]
        wrap = [b for b in pot if p.L % 2 and b.site == p.L - 1]
        pot = even + odd + wrap
    return TrotterPlan(p.dt if dt is None else dt, tuple(kin + pot), ordering, fused, gateset)


def trotter_circuit(plan: TrotterPlan, n_qubits: int) -> Circuit:
    """One step as fused ``HeisenbergExp`` gates, lowered to ``plan.gateset`` if given."""
    c = Circuit(n_qubits, tuple(Gate("HeisenbergExp", (b.q1, b.q2), b.weight * plan.dt) for b in plan.bonds))
    if not plan.fused:
        c = lower_to_gateset(c, plan.gateset or CNOT_ROTATIONS)
    return c


def trotter_step(state: StateVector, plan: TrotterPlan) -> StateVector:
    """``prod_b exp(-i w_b dt (XX+YY+ZZ))`` in plan order."""
    return apply_circuit(state, trotter_circuit(plan, state.n_qubits))


# ---------------------------------------------------------------------------
# exact evolution


def _dense_propagate(H: PauliSum, psi: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(H.to_dense())
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))


def krylov_propagate(matvec, psi: np.ndarray, t: float, *, tol: float = 1e-10, m: int = 30,
                     max_substeps: int = 100000) -> np.ndarray:
    """``exp(-i A t) psi`` by Lanczos (Krylov) propagation with adaptive substeps.

    The local error of each substep is estimated by the magnitude of the
    last Krylov coefficient of the propagated vector.
    """
    psi = np.asarray(psi, dtype=complex).copy()
    nrm0 = np.linalg.norm(psi)
    if t == 0 or nrm0 == 0:
        return psi
    done, tau, steps = 0.0, abs(t), 0
    sign = 1.0 if t > 0 else -1.0
    while done < abs(t) - 1e-15:
        steps += 1
        if steps > max_substeps:
            raise ConvergenceError("Krylov propagation exceeded the substep cap")
        nrm = np.linalg.norm(psi)
        V = [psi / nrm]
        alphas, betas = [], []
        for j in range(m):
            w = matvec(V[j])
            alphas.append(float(np.vdot(V[j], w).real))
            for _ in range(2):
                for v in V:
                    w = w - np.vdot(v, w) * v
            b = float(np.linalg.norm(w))
            if b < 1e-14:
                break
            betas.append(b)
            V.append(w / b)
        k = len(alphas)
        T = np.diag(alphas) + np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
        tau = min(tau, abs(t) - done)
        while True:
            c = expm(-1j * sign * tau * T)[:, 0]
            err = (betas[k - 1] if len(betas) >= k else 0.0) * abs(c[-1])
            if err <= tol * tau / abs(t) or tau < 1e-12:
                break
            tau /= 2
        psi = nrm * (np.array(V[:k]).T @ c)
        done += tau
        if err < 0.1 * tol * tau / abs(t):
            tau *= 1.5
    return psi


def exact_evolve(state: StateVector, H: PauliSum, t: float, method: str = "auto", tol: float = 1e-10) -> StateVector:
    """``exp(-i H t)|state>``: dense eigendecomposition up to 14 qubits, Krylov otherwise."""
    n = state.n_qubits
    if H.n_qubits != n:
        raise ValidationError("Hamiltonian and state differ in qubit count")
    if method == "auto":
        method = "dense" if n <= DENSE_EXACT_QUBITS else "krylov"
    if method == "dense":
        out = _dense_propagate(H, state.amplitudes, t)
    elif method == "krylov":
        bonds = bond_form(H)
        w = weight_of_state(state.amplitudes, n)
        if bonds is not None and w is not None:
            sec = Sector(n, w)
            mv = sec.bond_operator(bonds)
            out = sec.embed(krylov_propagate(mv, sec.restrict(state.amplitudes), t, tol=tol))
        else:
            out = krylov_propagate(lambda x: apply_pauli_sum(x, H), state.amplitudes, t, tol=tol)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return StateVector(n, out, max_qubits=n)


# ---------------------------------------------------------------------------
# time series


@dataclass
class TimeSeries:
    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.t.shape:
                raise ValidationError("stderr length differs from t")
        if self.value.shape != self.t.shape:
            raise ValidationError("value length differs from t")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValidationError("time points must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def window(self, t_max: float | None = None, t_min: float = 0.0) -> "TimeSeries":
        m = self.t >= t_min
        if t_max is not None:
            m &= self.t <= t_max + 1e-9
        se = None if self.stderr is None else self.stderr[m]
        return TimeSeries(self.t[m], self.value[m], se, dict(self.metadata))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value", "stderr"])
        for i in range(len(self.t)):
            se = "" if self.stderr is None else f"{self.stderr[i]:.17g}"
            w.writerow([f"{self.t[i]:.17g}", f"{self.value[i]:.17g}", se])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata: dict | None = None) -> "TimeSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["t", "value", "stderr"]:
            raise ValidationError("CSV header must be t,value,stderr")
        body = rows[1:]
        t = [float(r[0]) for r in body]
        v = [float(r[1]) for r in body]
        se = [r[2] for r in body]
        stderr = None if (not body or any(s == "" for s in se)) else [float(s) for s in se]
        return cls(np.array(t), np.array(v), None if stderr is None else np.array(stderr), metadata or {})

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# evolution engines


class _SectorEngine:
    """Trotter evolution on a fixed-weight sector (valid for Heisenberg bonds)."""

    def __init__(self, sec: Sector, amps: np.ndarray, plan: TrotterPlan):
        self.sec = sec
        self.amps = np.ascontiguousarray(amps, dtype=complex)
        self.ops = [(b.q1, b.q2, b.weight * plan.dt) for b in plan.bonds]
        for q1, q2, _ in self.ops:
            sec.swap_permutation(q1, q2)
        self._diag_cache: dict[int, np.ndarray] = {}

    @property
    def n_qubits(self) -> int:
        return self.sec.n_qubits

    def step(self) -> None:
        for q1, q2, alpha in self.ops:
            self.sec.apply_heisenberg(self.amps, alpha, q1, q2)

    def diagonal(self, obs: PauliSum) -> np.ndarray:
        key = id(obs)
        if key not in self._diag_cache:
            self._diag_cache[key] = obs.diagonal(self.sec.basis)
        return self._diag_cache[key]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def expectation(self, obs: PauliSum) -> float:
        if obs.is_diagonal:
            return float(np.dot(self.probabilities(), self.diagonal(obs)))
        return expectation_pauli_sum(self.state(), obs)

    def sample(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        return self.sec.basis[sample_indices(self.probabilities(), shots, rng)]

    def state(self) -> StateVector:
        n = self.sec.n_qubits
        return StateVector(n, self.sec.embed(self.amps), max_qubits=n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


class _FullEngine:
    def __init__(self, state: StateVector, plan: TrotterPlan):
        self.sv = state.copy()
        self.plan = plan
        self.circuit = trotter_circuit(plan, state.n_qubits)

    @property
    def n_qubits(self) -> int:
        return self.sv.n_qubits

    def step(self) -> None:
        apply_circuit(self.sv, self.circuit)

    def probabilities(self) -> np.ndarray:
        return self.sv.probabilities()

    def expectation(self, obs: PauliSum) -> float:
        return expectation_pauli_sum(self.sv, obs)

    def sample(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        return sample_indices(self.probabilities(), shots, rng)

    def state(self) -> StateVector:
        return self.sv.copy()

    def norm(self) -> float:
        return self.sv.norm()


def make_engine(state: StateVector | tuple[Sector, np.ndarray], plan: TrotterPlan, use_sector: bool = True):
    """Pick the sector engine when the state lives in one Hamming-weight sector."""
    if isinstance(state, tuple):
        sec, amps = state
        if plan.fused:
            return _SectorEngine(sec, amps, plan)
        n = sec.n_qubits
        state = StateVector(n, sec.embed(amps), max_qubits=n)
    if use_sector and plan.fused:
        w = weight_of_state(state.amplitudes, state.n_qubits)
        if w is not None:
            sec = Sector(state.n_qubits, w)
            if sec.leakage(state.amplitudes) <= 1e-20:
                return _SectorEngine(sec, sec.restrict(state.amplitudes), plan)
    return _FullEngine(state, plan)


def shot_estimate(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of per-shot observable values."""
    n = len(values)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _observable_metadata(obs: PauliSum) -> dict:
    return {"n_terms": len(obs), "terms": obs.to_json()}


@dataclass
class Trajectory:
    """Per-step record of one evolution: full states (exact) or sampled basis indices."""

    t: np.ndarray
    mode: str
    n_qubits: int
    states: list | None = None
    samples: list[np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)


def run_trajectory(state0, p: ModelParams, mode: str = "exact", *, plan: TrotterPlan | None = None,
                   shots: int | None = None, seed: int | None = None, max_stored: int = 2**26) -> Trajectory:
    """Evolve and store every step for later post-processing."""
    plan = plan or make_plan(p)
    eng = make_engine(state0, plan)
    rng = np.random.default_rng(p.seed if seed is None else seed)
    shots = p.shots if shots is None else shots
    ts, states, samples = [], [], []
    stored = 0
    for k in range(1, p.n_steps + 1):
        eng.step()
        ts.append(k * plan.dt)
        if mode == "exact":
            s = eng.state()
            stored += s.dim
            if stored > max_stored:
                raise ValidationError("trajectory too large to store; evaluate observables on the fly")
            states.append(s)
        elif mode == "sampled":
            samples.append(eng.sample(shots, rng))
        else:
            raise ValidationError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return Trajectory(np.array(ts), mode, eng.n_qubits, states if mode == "exact" else None,
                      samples if mode == "sampled" else None, {"params": p.to_dict(), "mode": mode})


def evolve_series(state0, p: ModelParams, observable: PauliSum | Sequence[PauliSum], mode: str = "exact", *,
                  plan: TrotterPlan | None = None, shots: int | None = None, seed: int | None = None,
                  monitor=None):
    """Trotter-evolve ``state0`` for ``p.n_steps`` steps and record observables.

    ``mode="exact"`` records exact expectation values of the evolved state;
    ``mode="sampled"`` draws ``shots`` Z-basis samples per step and averages
    the per-shot eigenvalue of each (diagonal) observable.  Several
    observables are evaluated on the *same* trajectory and the same samples.
    Returns one :class:`TimeSeries` per observable (or a single one when a
    single observable is passed).
    """
    single = isinstance(observable, PauliSum)
    observables = [observable] if single else list(observable)
    if mode not in ("exact", "sampled"):
        raise ValidationError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    shots = p.shots if shots is None else shots
    if mode == "sampled":
        if shots < 1:
            raise ValidationError("sampled mode needs shots >= 1")
        for o in observables:
            if not o.is_diagonal:
                raise ValidationError("sampled mode measures diagonal (Z-string) observables only")
    plan = plan or make_plan(p)
    eng = make_engine(state0, plan)
    for o in observables:
        if o.n_qubits != eng.n_qubits:
            raise ValidationError("observable and state differ in qubit count")
    seed = p.seed if seed is None else seed
    rng = np.random.default_rng(seed)

    n_obs = len(observables)
    ts = np.arange(1, p.n_steps + 1) * plan.dt
    vals = np.zeros((n_obs, p.n_steps))
    errs = np.zeros((n_obs, p.n_steps))
    for k in range(p.n_steps):
        eng.step()
        if monitor is not None:
            monitor(k + 1, eng)
        if mode == "exact":
            for i, o in enumerate(observables):
                vals[i, k] = eng.expectation(o)
        else:
            idx = eng.sample(shots, rng)
            for i, o in enumerate(observables):
                vals[i, k], errs[i, k] = shot_estimate(o.diagonal(idx))
    out = []
    for i, o in enumerate(observables):
        meta = {
            "params": p.to_dict(),
            "mode": mode,
            "seed": seed,
            "shots": shots if mode == "sampled" else None,
            "ordering": plan.ordering,
            "fused": plan.fused,
            "dt": plan.dt,
            "observable": _observable_metadata(o),
            "code_version": __version__,
        }
        out.append(TimeSeries(ts, vals[i], errs[i] if mode == "sampled" else None, meta))
    return out[0] if single else out
