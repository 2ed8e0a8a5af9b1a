"""Stochastic Pauli-noise trajectories (qualitative device damping)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .evolve import TimeSeries, TrotterPlan, evolve_series, make_plan, shot_estimate, trotter_circuit
from .gates import Circuit
from .model import ModelParams
from .pauli import PauliSum
from .statevec import StateVector, apply_circuit, apply_pauli_sum, sample_indices

_PAULIS = "IXYZ"
MAX_BATCH_AMPLITUDES = 2**26


@dataclass(frozen=True)
class NoiseSpec:
    p2q: float = 0.0
    p1q: float = 0.0
    trajectories: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("p2q", "p1q"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.trajectories < 1:
            raise ValidationError("trajectories must be >= 1")

    @property
    def noiseless(self) -> bool:
        return self.p2q == 0.0 and self.p1q == 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def random_pauli_ops(qubits: tuple[int, ...], rng: np.random.Generator) -> tuple[tuple[int, str], ...]:
    """Uniformly random non-identity Pauli string on ``qubits``."""
    k = len(qubits)
    code = int(rng.integers(1, 4**k))
    ops = []
    for q in qubits:
        p = _PAULIS[code % 4]
        code //= 4
        if p != "I":
            ops.append((q, p))
    return tuple(ops)


class _Batch:
    """``T`` statevectors stored as the columns of a ``(2**n, T)`` array."""

    def __init__(self, amps: np.ndarray, T: int, rng: np.random.Generator, ns: NoiseSpec):
        n = int(amps.shape[0]).bit_length() - 1
        if amps.shape[0] * T > MAX_BATCH_AMPLITUDES:
            raise ValidationError(f"{T} trajectories of {n} qubits exceed the memory guard")
        self.n = n
        self.psi = np.repeat(amps[:, None], T, axis=1).astype(complex)
        self.rng = rng
        self.ns = ns
        self.events = 0

    def _maybe_fault(self, qubits: tuple[int, ...], p: float) -> None:
        if p <= 0.0:
            return
        hit = np.nonzero(self.rng.random(self.psi.shape[1]) < p)[0]
        for j in hit:
            ops = random_pauli_ops(qubits, self.rng)
            self.psi[:, j] = _kernels.apply_pauli_string(self.psi[:, j], ops, self.n)
        self.events += len(hit)

    def apply_circuit(self, c: Circuit) -> None:
        for g in c.gates:
            if g.kind == "HeisenbergExp":
                self.psi = _kernels.apply_heisenberg(self.psi, g.angle, *g.qubits, self.n)
            else:
                self.psi = _kernels.apply_matrix(self.psi, g.matrix(), g.qubits, self.n)
            self._maybe_fault(g.qubits, self.ns.p2q if len(g.qubits) == 2 else self.ns.p1q)

    def probabilities(self) -> np.ndarray:
        """Trajectory-averaged Z-basis distribution (the mixed-state diagonal)."""
        return np.mean(np.abs(self.psi) ** 2, axis=1)

    def expectations(self, obs: PauliSum) -> np.ndarray:
        if obs.is_diagonal:
            return obs.diagonal() @ (np.abs(self.psi) ** 2)
        return np.einsum("it,it->t", self.psi.conj(), apply_pauli_sum(self.psi, obs)).real


def evolve_series_noisy(prep: StateVector | tuple[Circuit, StateVector], p: ModelParams, ns: NoiseSpec,
                        observable: PauliSum, mode: str = "exact", *, plan: TrotterPlan | None = None,
                        kick: Circuit | None = None, shots: int | None = None,
                        force_trajectories: bool = False) -> TimeSeries:
    """Monte Carlo over Pauli-fault trajectories.

    ``prep`` is either a ready state or ``(circuit, reference)``: the circuit
    is run on the reference state with noise so that preparation gates are
    faulty too.  ``kick`` (``Rz`` gates) is applied with 1-qubit noise after
    preparation.  ``mode="exact"`` averages trajectory expectations (stderr
    is the Monte Carlo error); ``mode="sampled"`` draws ``shots`` samples
    from the trajectory mixture.

    With both probabilities zero every trajectory is identical and the call
    reduces to :func:`evolve_series` with the same seed, unless
    ``force_trajectories`` is set.
    """
    if mode not in ("exact", "sampled"):
        raise ValidationError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    plan = plan or make_plan(p)
    shots = p.shots if shots is None else shots
    meta_noise = {"noise": ns.to_dict()}

    if isinstance(prep, tuple):
        prep_circuit, ref = prep
    else:
        prep_circuit, ref = None, prep
    n = ref.n_qubits
    if observable.n_qubits != n:
        raise ValidationError("observable and state differ in qubit count")

    if ns.noiseless and not force_trajectories:
        s = ref.copy()
        if prep_circuit is not None:
            apply_circuit(s, prep_circuit)
        if kick is not None:
            apply_circuit(s, kick)
        ts = evolve_series(s, p, observable, mode, plan=plan, shots=shots, seed=ns.seed)
        ts.metadata.update(meta_noise)
        return ts

    if mode == "sampled" and not observable.is_diagonal:
        raise ValidationError("sampled mode measures diagonal observables only")
    if mode == "sampled" and shots < 1:
        raise ValidationError("sampled mode needs shots >= 1")

    noise_rng, meas_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(ns.seed).spawn(2))
    batch = _Batch(ref.amplitudes, ns.trajectories, noise_rng, ns)
    if prep_circuit is not None:
        batch.apply_circuit(prep_circuit)
    if kick is not None:
        batch.apply_circuit(kick)
    step = trotter_circuit(plan, n)

    ts = np.arange(1, p.n_steps + 1) * plan.dt
    vals = np.zeros(p.n_steps)
    errs = np.zeros(p.n_steps)
    diag = observable.diagonal() if observable.is_diagonal else None
    T = ns.trajectories
    for k in range(p.n_steps):
        batch.apply_circuit(step)
        if mode == "exact":
            e = batch.expectations(observable)
            vals[k] = float(np.mean(e))
            errs[k] = float(np.std(e, ddof=1) / math.sqrt(T)) if T > 1 else 0.0
        else:
            idx = sample_indices(batch.probabilities(), shots, meas_rng)
            vals[k], errs[k] = shot_estimate(diag[idx])
    meta = {
        "params": p.to_dict(),
        "mode": mode,
        "seed": ns.seed,
        "shots": shots if mode == "sampled" else None,
        "ordering": plan.ordering,
        "fused": plan.fused,
        "dt": plan.dt,
        "fault_events": batch.events,
        **meta_noise,
    }
    return TimeSeries(ts, vals, errs, meta)

