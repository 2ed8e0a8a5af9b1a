import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from fuzzygap.errors import ValidationError
from fuzzygap.evolve import make_plan, trotter_circuit
from fuzzygap.gates import (
    CNOT_ROTATIONS,
    FUSED,
    RZZ_FRACTIONAL,
    RZZ_NATIVE,
    Circuit,
    Gate,
    GateSet,
    circuit_unitary,
    heisenberg_block,
    lower_to_gateset,
    pauli_pair_rotation,
    phase_distance,
    resource_count,
    singlet_pair,
)
from fuzzygap.model import ModelParams

from conftest import PAULI, dense_heisenberg_pair


def _pair(p):
    return np.kron(PAULI[p], PAULI[p])


def test_gate_validation():
    with pytest.raises(ValidationError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValidationError):
        Gate("Rz", (0,), float("inf"))
    with pytest.raises(ValidationError):
        Gate("H", (0,), 0.3)
    with pytest.raises(ValidationError):
        Gate("Toffoli", (0, 1))
    with pytest.raises(ValidationError):
        Circuit(2, (Gate("X", (2,)),))


def test_rotation_conventions():
    th = 0.83
    assert np.allclose(Gate("Rz", (0,), th).matrix(), expm(-0.5j * th * PAULI["Z"]))
    assert np.allclose(Gate("Ry", (0,), th).matrix(), expm(-0.5j * th * PAULI["Y"]))
    assert np.allclose(Gate("Rzz", (0, 1), th).matrix(), expm(-0.5j * th * _pair("Z")))


@pytest.mark.parametrize("alpha", [0.0, math.pi / 4, 0.3, -1.7])
def test_heisenberg_block_matches_exponential(alpha):
    u = circuit_unitary(heisenberg_block(alpha, 1, 0))
    assert phase_distance(u, dense_heisenberg_pair(alpha)) < 1e-10


def test_heisenberg_block_is_the_nine_gate_sequence():
    c = heisenberg_block(0.2, 0, 1)
    assert [g.kind for g in c.gates] == ["CNOT", "Rz", "CNOT", "Ry", "CNOT", "Ry", "Rz", "Rz", "CNOT"]
    assert resource_count(c).counts["CNOT"] == 4


def test_heisenberg_block_on_singlet_is_a_phase():
    u = circuit_unitary(singlet_pair(0, 1, 2))
    singlet = u[:, 0]
    out = circuit_unitary(heisenberg_block(0.3, 0, 1)) @ singlet
    assert abs(abs(np.vdot(singlet, out)) - 1) < 1e-12
    # eigenvalue -3 of XX+YY+ZZ: exact phase e^{+3i alpha}
    assert np.isclose(np.vdot(singlet, dense_heisenberg_pair(0.3) @ singlet), np.exp(3j * 0.3))


def test_pauli_pair_rotations():
    assert len(pauli_pair_rotation("ZZ", 0.4, 0, 1)) == 1
    for axis, th in (("XX", math.pi / 2), ("YY", 0.7), ("ZZ", -0.4)):
        u = circuit_unitary(pauli_pair_rotation(axis, th, 1, 0))
        assert phase_distance(u, expm(-0.5j * th * _pair(axis[0]))) < 1e-10


def test_lowering_heisenberg_to_cnot_set_gives_figure_expansion():
    c = Circuit(2, (Gate("HeisenbergExp", (0, 1), 0.4),))
    low = lower_to_gateset(c, CNOT_ROTATIONS)
    assert low.gates == heisenberg_block(0.4, 0, 1).gates


def test_fractional_rzz_split():
    low = lower_to_gateset(Circuit(2, (Gate("Rzz", (0, 1), 2.0),)), RZZ_FRACTIONAL)
    assert [(g.kind, g.angle) for g in low.gates] == [("Rzz", 1.0), ("Rzz", 1.0)]


def test_native_circuit_unchanged():
    c = Circuit(3, (Gate("H", (0,)), Gate("CNOT", (0, 1)), Gate("Rz", (2,), 0.1)))
    assert lower_to_gateset(c, CNOT_ROTATIONS) == c


def test_unlowerable_gate():
    only_h_cnot = GateSet("tiny", {"H", "CNOT"})
    with pytest.raises(ValidationError):
        lower_to_gateset(Circuit(2, (Gate("Rzz", (0, 1), 0.3),)), only_h_cnot)


def test_gateset_needs_an_entangler():
    with pytest.raises(ValidationError):
        GateSet("local", {"H", "Rz"})


def test_resource_counts():
    empty = resource_count(Circuit(2))
    assert empty.counts == {} and empty.two_qubit_depth == 0 and empty.two_qubit_count == 0
    assert resource_count(singlet_pair(0, 1, 2)).counts == {"X": 2, "H": 1, "CNOT": 1}


def test_trotter_step_cnot_count_at_L4():
    p = ModelParams(L=4, g=1.2)
    low = lower_to_gateset(trotter_circuit(make_plan(p), 8), CNOT_ROTATIONS)
    res = resource_count(low)
    # 2L bonds, four CNOTs per block
    assert res.counts["CNOT"] == 2 * 4 * 4
    assert resource_count(lower_to_gateset(low, CNOT_ROTATIONS)).counts == res.counts


def test_circuit_json_round_trip():
    c = heisenberg_block(0.25, 2, 3, 4)
    assert Circuit.from_json(json.loads(c.dumps())) == c


_GATES_1Q = ["X", "Y", "Z", "H", "S", "Sdg", "Rz", "Ry"]
_GATES_2Q = ["CNOT", "Rzz", "HeisenbergExp"]


@st.composite
def circuits(draw, n=4):
    gates = []
    for _ in range(draw(st.integers(1, 12))):
        kind = draw(st.sampled_from(_GATES_1Q + _GATES_2Q))
        if kind in _GATES_2Q:
            a = draw(st.integers(0, n - 1))
            b = draw(st.integers(0, n - 2))
            q = (a, b if b < a else b + 1)
        else:
            q = (draw(st.integers(0, n - 1)),)
        ang = draw(st.floats(-4, 4)) if kind in ("Rz", "Ry", "Rzz", "HeisenbergExp") else None
        gates.append(Gate(kind, q, ang))
    return Circuit(n, tuple(gates))


@given(circuits(), st.sampled_from([CNOT_ROTATIONS, RZZ_NATIVE, RZZ_FRACTIONAL, FUSED]))
def test_lowering_preserves_unitary(c, gs):
    low = lower_to_gateset(c, gs)
    assert all(gs.admits(g) for g in low.gates)
    assert phase_distance(circuit_unitary(low), circuit_unitary(c)) < 1e-9
    again = lower_to_gateset(low, gs)
    assert resource_count(again).counts == resource_count(low).counts
