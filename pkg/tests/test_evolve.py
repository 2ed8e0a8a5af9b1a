import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from fuzzygap.analysis import fit_damped_sinusoid
from fuzzygap.errors import ValidationError
from fuzzygap.evolve import (
    TimeSeries,
    evolve_series,
    exact_evolve,
    krylov_propagate,
    make_engine,
    make_plan,
    run_trajectory,
    trotter_step,
)
from fuzzygap.model import ModelParams, build_hamiltonian, dipole, total_z
from fuzzygap.pauli import PauliSum, PauliTerm
from fuzzygap.prep import PrepSpec, prepare, prepare_sector
from fuzzygap.sector import Sector
from fuzzygap.statevec import StateVector, expectation_pauli_sum

from conftest import random_state


def _strong(L=4, g=1.2, n_steps=13, dt=0.4, **kw):
    p = ModelParams(L=L, g=g, t_prep=0.1, dt=dt, n_steps=n_steps, **kw)
    return p, prepare(PrepSpec("strong", 0.1, 1.0), L, dipole(L, 1.0))


def test_zero_step_is_identity(rng):
    p = ModelParams(L=3, g=1.0)
    psi = random_state(6, rng)
    out = trotter_step(StateVector(6, psi.copy()), make_plan(p, dt=0.0))
    assert np.allclose(out.amplitudes, psi, atol=1e-14)


def _one_step_infidelity(p, dt, psi):
    H = build_hamiltonian(p).to_dense()
    exact = expm(-1j * dt * H) @ psi
    trot = trotter_step(StateVector(p.n_qubits, psi.copy()), make_plan(p, dt=dt)).amplitudes
    return 1 - abs(np.vdot(exact, trot)) ** 2, np.linalg.norm(exact - trot)


def test_one_step_error_is_second_order(rng):
    p = ModelParams(L=3, g=1.0)
    psi = random_state(6, rng)
    for dt in (0.05, 0.1, 0.2):
        infid, _ = _one_step_infidelity(p, dt, psi)
        assert infid <= 0.05 * dt**2
    _, e1 = _one_step_infidelity(p, 0.1, psi)
    _, e2 = _one_step_infidelity(p, 0.05, psi)
    assert 3.5 < e1 / e2 < 4.5  # local error O(dt^2)


def test_global_error_halves_with_step(rng):
    p = ModelParams(L=3, g=1.0)
    psi = random_state(6, rng)
    H = build_hamiltonian(p).to_dense()
    T = 1.0
    exact = expm(-1j * T * H) @ psi
    errs = []
    for n in (20, 40):
        sv = StateVector(6, psi.copy())
        plan = make_plan(p, dt=T / n)
        for _ in range(n):
            trotter_step(sv, plan)
        errs.append(np.linalg.norm(sv.amplitudes - exact))
    assert 0.45 < errs[1] / errs[0] < 0.55


def test_orderings_agree_to_trotter_order(rng):
    p = ModelParams(L=5, g=0.9)
    psi = random_state(10, rng)
    a = trotter_step(StateVector(10, psi.copy()), make_plan(p, "natural", dt=0.01)).amplitudes
    b = trotter_step(StateVector(10, psi.copy()), make_plan(p, "even_odd", dt=0.01)).amplitudes
    assert np.linalg.norm(a - b) < 1e-3
    assert {x.site for x in make_plan(p, "even_odd").bonds[5:]} == set(range(5))


def test_unfused_plan_matches_fused(rng):
    p = ModelParams(L=3, g=1.1)
    psi = random_state(6, rng)
    a = trotter_step(StateVector(6, psi.copy()), make_plan(p, dt=0.3)).amplitudes
    b = trotter_step(StateVector(6, psi.copy()), make_plan(p, dt=0.3, fused=False)).amplitudes
    # same unitary up to a global phase
    assert abs(abs(np.vdot(a, b)) - 1) < 1e-10


def test_sector_engine_matches_full_engine():
    p, st0 = _strong(n_steps=5)
    plan = make_plan(p)
    a, b = make_engine(st0, plan), make_engine(st0, plan, use_sector=False)
    assert type(a).__name__ == "_SectorEngine" and type(b).__name__ == "_FullEngine"
    for _ in range(5):
        a.step()
        b.step()
    assert np.allclose(a.state().amplitudes, b.state().amplitudes, atol=1e-12)


def test_empty_observable_gives_zeros():
    p, st0 = _strong(n_steps=4)
    ts = evolve_series(st0, p, PauliSum(8))
    assert np.array_equal(ts.value, np.zeros(4))


def test_zero_steps_gives_empty_series():
    p, st0 = _strong(n_steps=0)
    ts = evolve_series(st0, p, dipole(4))
    assert len(ts) == 0


def test_energy_is_constant_in_time():
    p, st0 = _strong(n_steps=6)
    H = build_hamiltonian(p)
    e0 = expectation_pauli_sum(st0, H)
    # Trotter dynamics conserves H only up to O(dt); exact evolution conserves it exactly
    dev = []
    for dt in (0.1, 0.05):
        q = ModelParams(L=4, g=1.2, dt=dt, n_steps=int(round(2.0 / dt)))
        dev.append(np.max(np.abs(evolve_series(st0, q, H).value - e0)))
    assert dev[1] < dev[0] < 0.5
    for t in (0.5, 3.0):
        assert math.isclose(expectation_pauli_sum(exact_evolve(st0.copy(), H, t), H), e0, abs_tol=1e-10)


def test_sampled_mean_agrees_with_exact():
    p, st0 = _strong(n_steps=6)
    d = dipole(4)
    ex = evolve_series(st0, p, d)
    sm = evolve_series(st0, p, d, "sampled", shots=100_000, seed=3)
    z = np.abs(sm.value - ex.value) / sm.stderr
    assert np.all(z < 4)


def test_stderr_scales_as_inverse_sqrt_shots():
    p, st0 = _strong(n_steps=6)
    d = dipole(4)
    a = evolve_series(st0, p, d, "sampled", shots=2_000, seed=1).stderr
    b = evolve_series(st0, p, d, "sampled", shots=32_000, seed=2).stderr
    assert np.all(np.abs(a / b / 4 - 1) < 0.2)


def test_sampled_rejects_off_diagonal():
    p, st0 = _strong(n_steps=2)
    with pytest.raises(ValidationError):
        evolve_series(st0, p, build_hamiltonian(p), "sampled")


def test_reruns_are_bit_identical():
    p, st0 = _strong(n_steps=5)
    a = evolve_series(st0, p, dipole(4), "sampled", shots=500, seed=11)
    b = evolve_series(st0, p, dipole(4), "sampled", shots=500, seed=11)
    assert a.to_csv() == b.to_csv()


def test_several_observables_share_one_trajectory():
    p, st0 = _strong(n_steps=5)
    obs = [dipole(4, 1.0), dipole(4, 0.5)]
    both = evolve_series(st0, p, obs, "sampled", shots=300, seed=4)
    alone = evolve_series(st0, p, obs[0], "sampled", shots=300, seed=4)
    assert np.array_equal(both[0].value, alone.value)
    traj = run_trajectory(st0, p, "sampled", shots=300, seed=4)
    means = [float(np.mean(obs[1].diagonal(s))) for s in traj.samples]
    assert np.allclose(both[1].value, means)


def test_strong_signal_oscillates_at_the_gap():
    p, st0 = _strong(dt=0.05, n_steps=400)
    ts = evolve_series(st0, p, dipole(4))
    fit = fit_damped_sinusoid(ts, 20.0)
    assert abs(fit.omega - 2.3368) < 0.03


def test_exact_evolve_zero_time_and_eigenstate(rng):
    p = ModelParams(L=3, g=1.0)
    H = build_hamiltonian(p)
    psi = random_state(6, rng)
    assert np.allclose(exact_evolve(StateVector(6, psi.copy()), H, 0.0).amplitudes, psi)
    w, v = np.linalg.eigh(H.to_dense())
    out = exact_evolve(StateVector(6, v[:, 0].astype(complex)), H, 1.7).amplitudes
    assert np.allclose(out, np.exp(-1j * w[0] * 1.7) * v[:, 0], atol=1e-10)


def test_krylov_matches_dense_at_ten_qubits():
    p = ModelParams(L=5, g=0.8)
    H = build_hamiltonian(p)
    st0 = prepare(PrepSpec("strong", 0.1, 1.0), 5, dipole(5))
    a = exact_evolve(st0.copy(), H, 2.5, method="dense").amplitudes
    b = exact_evolve(st0.copy(), H, 2.5, method="krylov").amplitudes
    assert np.linalg.norm(a - b) < 1e-8


def test_krylov_generic_matvec(rng):
    A = rng.standard_normal((60, 60)) + 1j * rng.standard_normal((60, 60))
    A = (A + A.conj().T) / 2
    psi = rng.standard_normal(60) + 0j
    out = krylov_propagate(lambda x: A @ x, psi, -0.8)
    assert np.allclose(out, expm(0.8j * A) @ psi, atol=1e-8)


def test_long_run_norm_and_sector():
    L = 4
    sec, amps = prepare_sector(PrepSpec("weak", 0.1, 0.5), L, dipole(L, 0.5))
    p = ModelParams(L=L, g=0.6, dt=0.1, n_steps=2000)
    eng = make_engine((sec, amps), make_plan(p))
    for _ in range(p.n_steps):
        eng.step()
    assert abs(eng.norm() - 1) < 1e-8
    st1 = eng.state()
    assert Sector(8, L).leakage(st1.amplitudes) <= 1e-10
    assert abs(expectation_pauli_sum(st1, total_z(8))) < 1e-10


@settings(max_examples=15)
@given(st.integers(3, 5), st.floats(0.3, 1.5), st.floats(0.01, 0.5), st.integers(0, 2**32 - 1))
def test_property_norm_and_leakage_full_register(L, g, dt, seed):
    rng = np.random.default_rng(seed)
    n = 2 * L
    sec = Sector(n, L)
    amps = rng.standard_normal(sec.dim) + 1j * rng.standard_normal(sec.dim)
    sv = StateVector(n, sec.embed(amps / np.linalg.norm(amps)))
    plan = make_plan(ModelParams(L=L, g=g), dt=dt)
    for _ in range(20):
        trotter_step(sv, plan)
    assert abs(sv.norm() - 1) <= 1e-8
    assert sec.leakage(sv.amplitudes) <= 1e-10


def test_timeseries_csv_round_trip():
    ts = TimeSeries([0.1, 0.2, 0.3], [1 / 3, -2.5e-17, math.pi], [0.01, 0.02, 1e-300])
    back = TimeSeries.from_csv(ts.to_csv())
    assert np.array_equal(back.t, ts.t) and np.array_equal(back.value, ts.value)
    assert np.array_equal(back.stderr, ts.stderr)
    plain = TimeSeries.from_csv(TimeSeries([1.0], [2.0]).to_csv())
    assert plain.stderr is None


def test_timeseries_guards():
    with pytest.raises(ValidationError):
        TimeSeries([0.2, 0.1], [0, 0])
    with pytest.raises(ValidationError):
        TimeSeries([0.1], [0, 1])
    with pytest.raises(ValidationError):
        TimeSeries.from_csv("a,b\n1,2\n")


def test_window():
    ts = TimeSeries(np.arange(1, 11) * 0.5, np.arange(10.0))
    assert len(ts.window(2.0)) == 4
    assert len(ts.window(2.0, t_min=1.0)) == 3
    z = PauliSum(8, [PauliTerm(1.0, ((0, "Z"),))])
    assert z.is_diagonal
