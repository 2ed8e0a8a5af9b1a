import numpy as np
import pytest

from fuzzygap.analysis import fit_damped_sinusoid
from fuzzygap.errors import ValidationError
from fuzzygap.evolve import evolve_series
from fuzzygap.model import ModelParams, dipole
from fuzzygap.noise import NoiseSpec, evolve_series_noisy, random_pauli_ops
from fuzzygap.prep import kick_circuit, strong_ground_circuit
from fuzzygap.statevec import StateVector, apply_circuit


def _setup(L=3, n_steps=8):
    p = ModelParams(L=L, g=1.2, t_prep=0.1, dt=0.4, n_steps=n_steps)
    d = dipole(L, 1.0)
    return p, d, (strong_ground_circuit(L), StateVector(2 * L)), kick_circuit(d, 0.1)


def test_noise_spec_guards():
    for kw in (dict(p2q=-0.1), dict(p1q=1.5), dict(p2q=float("nan")), dict(trajectories=0)):
        with pytest.raises(ValidationError):
            NoiseSpec(**kw)


def test_random_pauli_never_identity():
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(2000):
        ops = random_pauli_ops((2, 5), rng)
        assert ops
        seen.add(ops)
    assert len(seen) == 15


def test_noiseless_forced_trajectories_match_plain_evolution():
    p, d, prep, kick = _setup()
    ref = prep[1].copy()
    apply_circuit(ref, prep[0])
    apply_circuit(ref, kick)
    plain = evolve_series(ref, p, d)
    forced = evolve_series_noisy(prep, p, NoiseSpec(trajectories=3), d, kick=kick, force_trajectories=True)
    assert np.allclose(forced.value, plain.value, atol=1e-12)
    assert np.allclose(forced.stderr, 0.0, atol=1e-12)
    assert forced.metadata["fault_events"] == 0


def test_noiseless_shortcut_same_samples_per_seed():
    p, d, prep, kick = _setup()
    a = evolve_series_noisy(prep, p, NoiseSpec(seed=5), d, "sampled", kick=kick, shots=200)
    ref = prep[1].copy()
    apply_circuit(ref, prep[0])
    apply_circuit(ref, kick)
    b = evolve_series(ref, p, d, "sampled", shots=200, seed=5)
    assert np.array_equal(a.value, b.value)


def test_full_depolarisation_kills_the_signal():
    p, d, prep, kick = _setup()
    ts = evolve_series_noisy(prep, p, NoiseSpec(p2q=1.0, p1q=1.0, trajectories=400, seed=1), d, kick=kick)
    assert np.all(np.abs(ts.value[2:]) < 5 * ts.stderr[2:] + 0.05)


def test_noisy_runs_are_deterministic():
    p, d, prep, kick = _setup(n_steps=4)
    ns = NoiseSpec(p2q=0.05, p1q=0.01, trajectories=20, seed=9)
    a = evolve_series_noisy(prep, p, ns, d, "sampled", kick=kick, shots=100)
    b = evolve_series_noisy(prep, p, ns, d, "sampled", kick=kick, shots=100)
    assert a.to_csv() == b.to_csv()
    assert a.metadata["fault_events"] == b.metadata["fault_events"] > 0


def test_damping_grows_with_fault_rate():
    p, d, prep, kick = _setup(L=4, n_steps=13)
    gammas = []
    for p2q in (0.0, 0.02, 0.05):
        ts = evolve_series_noisy(prep, p, NoiseSpec(p2q=p2q, trajectories=300, seed=2), d, kick=kick,
                                 force_trajectories=True)
        gammas.append(fit_damped_sinusoid(ts, weighted=False).gamma)
    assert gammas[0] < gammas[1] < gammas[2]
    assert gammas[2] > 0


def test_sampled_noisy_needs_diagonal_observable():
    from fuzzygap.model import build_hamiltonian

    p, d, prep, kick = _setup(n_steps=2)
    with pytest.raises(ValidationError):
        evolve_series_noisy(prep, p, NoiseSpec(p2q=0.1, trajectories=2), build_hamiltonian(p), "sampled")
