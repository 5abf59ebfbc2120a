import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from qtm.core import BasisVector, QuditLattice, WaveState  # noqa: E402
from qtm import machines  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SPAN = 6


def lattices(d: int, span: int = SPAN, max_sites: int = 4):
    return st.dictionaries(st.integers(-span, span), st.integers(1, d - 1), max_size=max_sites).map(
        lambda m: QuditLattice(d, m))


def basis_vectors(L: int, d: int, span: int = SPAN, max_sites: int = 4):
    return st.builds(BasisVector, st.integers(0, L - 1), st.integers(-span + 1, span - 1),
                     lattices(d, span, max_sites))


def amplitudes():
    part = st.floats(-1.0, 1.0, allow_nan=False)
    return st.builds(complex, part, part)


def wave_states(L: int, d: int, max_components: int = 5, span: int = SPAN):
    return st.dictionaries(basis_vectors(L, d, span), amplitudes(), min_size=1, max_size=max_components).map(
        lambda m: WaveState(m, (L, d)))


@pytest.fixture(scope="session")
def builtins():
    return {name: machines.builtin(name) for name in machines.BUILTIN_NAMES}


def state_diff(a: WaveState, b: WaveState) -> float:
    """Largest componentwise difference, without pruning."""
    keys = set(a) | set(b)
    return max((abs(a[k] - b[k]) for k in keys), default=0.0)


def random_unitary(seed: int) -> np.ndarray:
    from scipy.stats import unitary_group

    return unitary_group.rvs(2, random_state=seed)
