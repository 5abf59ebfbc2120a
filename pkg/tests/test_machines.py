import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import lattices, random_unitary, state_diff
from qtm import machines as M
from qtm.core import BasisVector, IncompatibleDimensionsError, QuditLattice, WaveState, inner_product
from qtm.operators import apply, apply_adjoint, check_dpg_computation_basis, random_basis_vector
from qtm.paths import generate_path, verify_distinct_path


def power(T, psi, n):
    for _ in range(n):
        psi = apply(T, psi)
    return psi


# --------------------------------------------------------------- builtins

def test_builtin_lookup():
    assert M.builtin("builtin:free") == M.free()
    assert check_dpg_computation_basis(M.builtin("free")).decision
    with pytest.raises(KeyError):
        M.builtin("nope")


def test_builtin_shapes():
    assert [len(M.builtin(n).terms) for n in M.BUILTIN_NAMES] == [1, 2, 9, 4, 9, 9, 1]
    assert M.builtin("erasure").dims == (1, 2)
    assert M.builtin("add1").dims == (4, 3)
    assert M.builtin("interf1").dims == (3, 2)
    assert M.builtin("interf2").dims == (9, 2)
    assert [t.label for t in M.add1().terms] == [str(i) for i in range(1, 10)]


def test_non_unitary_v_rejected():
    with pytest.raises(ValueError):
        M.add1(v=np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        M.interf2(v=np.eye(3))


def test_marker_embedding_fixes_level_two():
    V = M.embed_with_marker(M.HADAMARD)
    assert V.shape == (3, 3) and V[2, 2] == 1 and not V[2, :2].any() and not V[:2, 2].any()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_add1_hadamard_stage(n):
    T = M.add1()
    psi = power(T, M.add1_initial_state([0, n + 1]), n + 1)
    assert len(psi) == 2 ** n
    for b, a in psi.items():
        assert abs(abs(a) - 2 ** (-n / 2)) < 1e-12
        assert b.head_pos == n + 1 and b.head_level == 1


def test_interf2_broken_not_dpg_on_single_one():
    T = M.builtin("interf2_broken")
    path = generate_path(T, M.interf2_single_seed(1), 12, 0)
    assert not verify_distinct_path(T, path).ok


# ---------------------------------------------------------- erasure path

def test_erasure_wall_state_terminal():
    T = M.erasure()
    assert apply(T, M.erasure_bt_state(4, 4)).norm() < 1e-12


@pytest.mark.parametrize("tail", [None, {6: 1}, {5: 1, 9: 1}])
def test_erasure_default_convention_weight_one(tail):
    T = M.erasure()
    psi = M.erasure_bt_state(1, 4, tail)
    out = apply(T, psi)
    assert abs(out.norm() - 1) < 1e-12
    assert state_diff(out, M.erasure_bt_state(2, 4, tail)) < 1e-12


def test_erasure_literal_convention_weight_half_root():
    T = M.erasure()
    out = apply(T, M.erasure_bt_state(1, 4, convention="head_site_zero"))
    assert abs(out.norm() - 1 / math.sqrt(2)) < 1e-12


def test_erasure_left_wall_adjoint_terminal():
    T = M.erasure()
    psi = M.erasure_bt_state(-2, 3, left_wall=-2, left_tail={-6: 1})
    assert apply_adjoint(T, psi).norm() < 1e-12
    assert abs(apply_adjoint(T, M.erasure_bt_state(-1, 3, left_wall=-2)).norm() - 1) < 1e-12


def test_erasure_state_errors():
    with pytest.raises(ValueError):
        M.erasure_bt_state(5, 4)
    with pytest.raises(ValueError):
        M.erasure_bt_state(1, 4, {4: 1})
    with pytest.raises(ValueError):
        M.erasure_bt_state(1, 4, convention="other")


# ------------------------------------------------------------ add-1 states

def test_add1_initial_states():
    psi = M.add1_initial_state([0, 3], head_pos=-2)
    (b,) = psi.support()
    assert b == BasisVector(0, -2, QuditLattice(3, {0: 2, 3: 2}))
    assert M.add1_initial_state([0, 2, 5, 9]).support()[0].lattice.support() == (0, 2, 5, 9)
    assert M.add1_initial_state([0]).support()[0].lattice.items() == ((0, 2),)
    with pytest.raises(ValueError):
        M.add1_initial_state([0, 3], head_pos=1)
    with pytest.raises(ValueError):
        M.add1_initial_state([3, 0])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_add1_closed_form_final_state(n):
    T = M.add1()
    simulated = power(T, M.add1_initial_state([0, n + 1]), 3 * n + 4)
    closed = M.add1_final_state(n)
    assert state_diff(simulated, closed) < 1e-10
    assert abs(closed.norm() - 1) < 1e-12


def test_add1_closed_form_n1_terms():
    v = M.HADAMARD
    psi = M.add1_final_state(1)
    lat = lambda m: QuditLattice(3, {0: 2, 2: 2, **m})
    expected = WaveState({BasisVector(0, 5, lat({1: 1})): v[0, 0], BasisVector(0, 3, lat({})): v[1, 0]}, (4, 3))
    assert state_diff(psi, expected) < 1e-15


@pytest.mark.parametrize("seed", [3, 11])
def test_add1_closed_form_general_v(seed):
    v = random_unitary(seed)
    T = M.add1(v)
    simulated = power(T, M.add1_initial_state([0, 4]), 13)
    assert state_diff(simulated, M.add1_final_state(3, v)) < 1e-10


def _I(b: BasisVector) -> float:
    s = b.scanned
    if b.head_level == 2:
        return 1.0
    return 1.0 if s in (0, 2) else 0.0


def _F(b: BasisVector, v: np.ndarray) -> dict:
    l, j = b.head_level, b.head_pos
    if l == 3:
        return {b: 1.0}
    if l == 2:
        return {b: 1.0} if b.lattice[j + 1] in (0, 2) else {}
    s = b.lattice[j - 1]
    if l == 0:
        return {b: 1.0} if s in (0, 2) else {}
    if s == 2:
        return {b: 1.0}
    # v P0 v^dagger on the qubit left of the head
    return {BasisVector(l, j, b.lattice.set(j - 1, s2)): v[s2, 0] * np.conj(v[s, 0]) for s2 in (0, 1)}


def test_add1_partial_isometry_projectors():
    T = M.add1()
    rng = random.Random(7)
    worst = 0.0
    for _ in range(200):
        b = random_basis_vector(T, rng, span=8, max_sites=3)
        e = WaveState({b: 1.0}, T.dims)
        A = apply_adjoint(T, apply(T, e))
        B = apply(T, apply_adjoint(T, e))
        worst = max(worst, state_diff(A, WaveState({b: _I(b)}, T.dims, prune_eps=0.0)))
        worst = max(worst, state_diff(B, WaveState(_F(b, M.HADAMARD), T.dims, prune_eps=0.0)))
        # idempotent
        worst = max(worst, state_diff(apply_adjoint(T, apply(T, A)), A))
        worst = max(worst, state_diff(apply(T, apply_adjoint(T, B)), B))
    assert worst < 1e-12


# ---------------------------------------------------------- interferometers

def test_interferometer_seeds():
    (b,) = M.interferometer_seed("interf1", z=2).support()
    assert b.lattice.items() == ((1, 1), (4, 1)) and b.head_pos < 1
    (b,) = M.interferometer_seed("interf2").support()
    assert b == BasisVector(0, 0, QuditLattice(2, {1: 1, 3: 1}))
    (b,) = M.interf2_chain_seed(3).support()
    assert b.lattice.support() == (1, 3, 5, 7, 9, 11)
    with pytest.raises(ValueError):
        M.interf1_seed(-1)


@given(lattices(2), st.integers(-6, 6))
def test_interf1_minus_arm_terminal(lat, j):
    T = M.interf1()
    lat = lat.set(j, 1)
    psi = WaveState({BasisVector(1, j, lat): 2 ** -0.5, BasisVector(2, j, lat): -(2 ** -0.5)}, T.dims)
    assert apply(T, psi).norm() < 1e-12


def test_interf1_plus_arm_not_terminal():
    T = M.interf1()
    lat = QuditLattice(2, {0: 1})
    psi = WaveState({BasisVector(1, 0, lat): 2 ** -0.5, BasisVector(2, 0, lat): 2 ** -0.5}, T.dims)
    assert abs(apply(T, psi).norm() - 1) < 1e-12


# ---------------------------------------------------------------------- I/O

@pytest.mark.parametrize("name", M.BUILTIN_NAMES)
def test_machine_round_trip(name, tmp_path):
    T = M.builtin(name)
    p = tmp_path / "m.json"
    M.save_machine(T, p)
    assert M.load_machine(p) == T


def test_machine_bad_head_shape(tmp_path):
    data = M.machine_to_dict(M.interf1())
    data["terms"][0]["head"] = [row[:2] for row in data["terms"][0]["head"]]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(data))
    with pytest.raises(IncompatibleDimensionsError):
        M.load_machine(p)


def test_machine_parse_error_has_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "name": "x",\n  "head_dim": 1,,\n}\n')
    with pytest.raises(M.MachineFormatError, match=":3:"):
        M.load_machine(p)


def test_machine_missing_field(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"name": "x", "terms": []}))
    with pytest.raises(M.MachineFormatError):
        M.load_machine(p)


def test_state_file_canonicalized(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"components": [{"amp": [1, 0], "head_level": 0, "head_pos": 0,
                                             "lattice": {"5": 0}}]}))
    psi = M.load_state(p, (1, 2))
    assert psi.support()[0].lattice.support() == ()


def test_state_round_trip(tmp_path):
    psi = M.add1_final_state(2)
    p = tmp_path / "s.json"
    M.save_state(psi, p)
    back = M.load_state(p)
    assert back.dims == psi.dims and state_diff(back, psi) == 0.0
    assert abs(inner_product(back, psi) - 1) < 1e-12
