import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import lattices, state_diff, wave_states
from qtm.core import (
    BasisVector,
    IncompatibleDimensionsError,
    QuditLattice,
    WaveState,
    inner_product,
    norm,
    state_from_dict,
    state_to_dict,
    superpose,
)

L, D = 3, 3


def ket(l, j, lattice=None, dims=(L, D), amp=1.0):
    return WaveState({BasisVector(l, j, QuditLattice(dims[1], lattice or {})): amp}, dims)


# ------------------------------------------------------------- lattice

def test_lattice_drops_level_zero():
    lat = QuditLattice(3, {1: 2, 4: 0, -2: 1})
    assert lat.items() == ((-2, 1), (1, 2))
    assert lat[4] == 0 and lat[100] == 0


def test_lattice_rejects_out_of_range_level():
    with pytest.raises(ValueError):
        QuditLattice(2, {0: 2})
    with pytest.raises(ValueError):
        QuditLattice(1)


@given(lattices(3), st.integers(-20, 20))
def test_lattice_insert_then_remove_zero_is_identity(lat, site):
    if site in lat.support():
        return
    assert lat.set(site, 2).set(site, 0) == lat
    assert hash(lat.set(site, 1).set(site, 0)) == hash(lat)


@given(lattices(3), st.integers(-5, 5), st.integers(-5, 5))
def test_lattice_shift_composes(lat, a, b):
    assert lat.shifted(a).shifted(b) == lat.shifted(a + b)


# ----------------------------------------------------- inner products

def test_basis_vector_is_unit():
    b = ket(1, 4, {4: 2})
    assert inner_product(b, b) == 1 + 0j


def test_distinct_head_positions_orthogonal():
    assert inner_product(ket(0, 0), ket(0, 1)) == 0


def test_inner_product_linearity():
    a = superpose([(2 ** -0.5, ket(0, 0)), (2 ** -0.5, ket(0, 1))])
    assert abs(inner_product(a, ket(0, 0)) - 2 ** -0.5) < 1e-15


def test_dimension_mismatch():
    with pytest.raises(IncompatibleDimensionsError):
        inner_product(ket(0, 0), ket(0, 0, dims=(2, 3)))
    with pytest.raises(IncompatibleDimensionsError):
        superpose([(1, ket(0, 0)), (1, ket(0, 0, dims=(3, 4)))])


def test_construction_checks_dims():
    with pytest.raises(IncompatibleDimensionsError):
        WaveState({BasisVector(5, 0, QuditLattice(3)): 1.0}, (3, 3))
    with pytest.raises(IncompatibleDimensionsError):
        WaveState({BasisVector(0, 0, QuditLattice(2)): 1.0}, (3, 3))


@given(wave_states(L, D), wave_states(L, D))
def test_inner_product_conjugate_symmetric(a, b):
    assert abs(inner_product(a, b) - inner_product(b, a).conjugate()) < 1e-14


@given(wave_states(L, D))
def test_self_inner_product_real_nonnegative(a):
    z = inner_product(a, a)
    assert abs(z.imag) < 1e-15 and z.real >= 0
    assert abs(norm(a) - math.sqrt(z.real)) < 1e-15
    assert abs(a.norm() - norm(a)) < 1e-14


# ---------------------------------------------------------- superpose

def test_superpose_cancellation():
    psi = superpose([(0.3, ket(0, 0)), (0.5j, ket(1, 2, {2: 1}))])
    assert superpose([(1, psi), (-1, psi)]).is_zero()


def test_superpose_doubles():
    out = superpose([(1, ket(0, 0)), (1, ket(0, 0))])
    assert len(out) == 1 and out[next(iter(out))] == 2


def test_prune_rule():
    assert superpose([(1e-15, ket(0, 0))], prune_eps=1e-12).is_zero()
    assert ket(0, 0, amp=1e-13).is_zero()
    assert not WaveState({BasisVector(0, 0, QuditLattice(3)): 1e-13}, (L, D), prune_eps=0.0).is_zero()


@given(wave_states(L, D), wave_states(L, D), wave_states(L, D))
def test_superpose_associative_commutative(a, b, c):
    left = superpose([(1, superpose([(1, a), (1, b)], prune_eps=0.0)), (1, c)], prune_eps=0.0)
    right = superpose([(1, a), (1, superpose([(1, c), (1, b)], prune_eps=0.0))], prune_eps=0.0)
    assert state_diff(left, right) < 1e-12
    assert state_diff(superpose([(1, a), (1, b)]), superpose([(1, b), (1, a)])) <= 1e-12


@given(wave_states(L, D), st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_scaling_matches_superpose(a, c):
    assert state_diff(a.scaled(c), superpose([(c, a)])) < 1e-14


def test_no_stored_amplitude_below_prune():
    psi = WaveState({BasisVector(0, j, QuditLattice(3)): 10.0 ** -j for j in range(16)}, (L, D))
    assert all(abs(a) > psi.prune_eps for _, a in psi.items())
    assert len(psi) == 12


def test_numpy_scalar_times_state():
    import numpy as np

    psi = ket(0, 0)
    assert (np.float64(2.0) * psi)[next(iter(psi))] == 2


# --------------------------------------------------------------- JSON

@given(wave_states(L, D))
def test_json_round_trip(psi):
    text = json.dumps(state_to_dict(psi))
    back = state_from_dict(json.loads(text))
    assert back.dims == psi.dims
    assert state_diff(back, psi) == 0.0


def test_json_level_zero_entries_dropped():
    data = {"components": [{"amp": [1, 0], "head_level": 0, "head_pos": 2, "lattice": {"5": 0, "-3": 1}}]}
    psi = state_from_dict(data, (2, 2))
    (b,) = psi.support()
    assert b.lattice.support() == (-3,)


def test_json_infers_dims():
    data = {"components": [{"amp": [0, 1], "head_level": 2, "head_pos": 0, "lattice": {"1": 3}}]}
    assert state_from_dict(data).dims == (3, 4)


def test_sort_order_deterministic():
    psi = WaveState({BasisVector(1, 0, QuditLattice(2)): 1, BasisVector(0, 3, QuditLattice(2, {1: 1})): 1,
                     BasisVector(0, 3, QuditLattice(2)): 1}, (2, 2))
    keys = [b.sort_key() for b, _ in psi.sorted_items()]
    assert keys == sorted(keys)
