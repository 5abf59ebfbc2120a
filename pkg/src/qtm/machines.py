"""Builtin machines, their special initial states, and the JSON machine/state loaders."""

from __future__ import annotations

import itertools
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    BasisVector,
    IncompatibleDimensionsError,
    QuditLattice,
    WaveState,
    state_from_dict,
    state_to_dict,
)
from .operators import StepOperator, StepTerm

SQRT1_2 = 1.0 / math.sqrt(2.0)

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) * SQRT1_2
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])

BUILTIN_NAMES = ("free", "erasure", "add1", "interf1", "interf2", "interf2_broken", "cycle")


class MachineFormatError(ValueError):
    """A machine or state file that does not parse or validate."""


def proj(n: int, k: int) -> np.ndarray:
    P = np.zeros((n, n), dtype=complex)
    P[k, k] = 1.0
    return P


def outer(a, b) -> np.ndarray:
    """``|a><b|``."""
    return np.outer(np.asarray(a, dtype=complex), np.conj(np.asarray(b, dtype=complex)))


def unit(n: int, k: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[k] = 1.0
    return e


def cyclic_shift(n: int, k: int = 1) -> np.ndarray:
    """``w |h> = |h + k mod n>``."""
    W = np.zeros((n, n), dtype=complex)
    for h in range(n):
        W[(h + k) % n, h] = 1.0
    return W


def unitary_from_column(target: np.ndarray) -> np.ndarray:
    """A unitary whose first column is ``target`` (a Householder reflection)."""
    target = np.asarray(target, dtype=complex)
    target = target / np.linalg.norm(target)
    n = len(target)
    e0 = unit(n, 0)
    # fix the phase so the reflection maps e0 exactly onto target
    phase = target[0] / abs(target[0]) if abs(target[0]) > 0 else 1.0
    u = e0 * phase - target
    if np.linalg.norm(u) < 1e-15:
        return np.eye(n, dtype=complex) * phase
    H = np.eye(n, dtype=complex) - 2.0 * np.outer(u, u.conj()) / np.vdot(u, u)
    return H * phase


def check_unitary(v, size: int = 2, tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.shape != (size, size):
        raise ValueError(f"expected a {size}x{size} unitary, got shape {v.shape}")
    defect = np.linalg.norm(v.conj().T @ v - np.eye(size))
    if defect >= tol:
        raise ValueError(f"matrix is not unitary: ||v^dagger v - 1|| = {defect:.3g}")
    return v


def embed_with_marker(v: np.ndarray) -> np.ndarray:
    """Extend a 2x2 operator on levels {0, 1} to a qutrit, acting as identity on level 2."""
    V = np.zeros((3, 3), dtype=complex)
    V[:2, :2] = v
    V[2, 2] = 1.0
    return V


# ---------------------------------------------------------------- machines

def free(L: int = 1, d: int = 2) -> StepOperator:
    """Free head motion: every basis vector moves one site to the right."""
    return StepOperator("free", L, d, (StepTerm(1.0, +1, np.eye(L), np.eye(d), "1"),))


def cycle(L: int = 3, d: int = 2) -> StepOperator:
    """Head levels permuted cyclically in place; every path closes after ``L`` steps."""
    return StepOperator(f"cycle{L}", L, d, (StepTerm(1.0, 0, cyclic_shift(L), np.eye(d), "1"),))


def erasure(projector_form: bool = False) -> StepOperator:
    """One-level head sweeping right, writing 0 behind it.

    The two-term form uses ``(sigma_x P_1 + P_0) / sqrt 2``; the projector form
    is the single equivalent term ``sqrt 2 P_0 P_+``.
    """
    P0, P1 = proj(2, 0), proj(2, 1)
    if projector_form:
        plus = np.array([1.0, 1.0]) * SQRT1_2
        qubit = math.sqrt(2.0) * P0 @ outer(plus, plus)
        return StepOperator("erasure", 1, 2, (StepTerm(1.0, +1, np.eye(1), qubit, "1"),))
    return StepOperator("erasure", 1, 2, (
        StepTerm(SQRT1_2, +1, np.eye(1), SIGMA_X @ P1, "1a"),
        StepTerm(SQRT1_2, +1, np.eye(1), P0, "1b"),
    ))


def add1(v=None) -> StepOperator:
    """Apply ``v`` to every qubit between two level-2 markers, then add 1 mod 2^n.

    Head levels 0..3, qutrit lattice (level 2 is the marker).  Term labels
    follow the usual 1..9 numbering.
    """
    v = check_unitary(HADAMARD if v is None else v)
    V = embed_with_marker(v)
    X = embed_with_marker(SIGMA_X)
    W = cyclic_shift(4)
    Q = [proj(4, i) for i in range(4)]
    P = [proj(3, s) for s in range(3)]
    spec = [
        (Q[0], P[0], +1),
        (W @ Q[0], P[2], +1),
        (Q[1], V @ P[0], +1),
        (W @ Q[1], P[2], -1),
        (Q[2], X @ P[1], -1),
        (W @ Q[2], X @ P[0], +1),
        (W @ Q[2], P[2], +1),
        (Q[3], P[0], +1),
        (W @ Q[3], P[2], +1),
    ]
    terms = tuple(StepTerm(1.0, dl, h, q, str(i + 1)) for i, (h, q, dl) in enumerate(spec))
    return StepOperator("add1", 4, 3, terms)


def interf1() -> StepOperator:
    """Interferometer whose two arms differ only in the head level."""
    w = unitary_from_column((unit(3, 1) + unit(3, 2)) * SQRT1_2)
    Q = [proj(3, i) for i in range(3)]
    P0, P1 = proj(2, 0), proj(2, 1)
    spec = [
        (Q[0], P0),
        (w @ Q[0], P1),
        (Q[1] + Q[2], P0),
        (Q[0] @ w.conj().T, P1),
    ]
    return StepOperator("interf1", 3, 2, tuple(StepTerm(1.0, +1, h, q, str(i + 1)) for i, (h, q) in enumerate(spec)))


def interf2(v=None, broken: bool = False) -> StepOperator:
    """Nine-level interferometer whose arms do different work before recombining.

    ``broken=True`` swaps the head shifts of terms 4 and 6, which desynchronises
    the arms.
    """
    v = check_unitary(HADAMARD if v is None else v)
    W2 = cyclic_shift(9, 2)
    Q = [proj(9, i) for i in range(9)]
    P0, P1 = proj(2, 0), proj(2, 1)
    w12 = unitary_from_column((unit(9, 1) + unit(9, 2)) * SQRT1_2)
    w78 = unitary_from_column((unit(9, 7) + unit(9, 8)) * SQRT1_2)
    d4, d6 = (+1, -1) if broken else (-1, +1)
    spec = [
        (Q[0], P0, +1),
        (w12 @ Q[0], P1, +1),
        (W2 @ Q[1], v @ P0, -1),
        (W2 @ Q[2], P0, d4),
        (W2 @ Q[3], P1, +1),
        (W2 @ Q[4], P1, d6),
        (W2 @ Q[5], P0 @ v.conj().T, +1),
        (W2 @ Q[6], P0, +1),
        (Q[0] @ w78.conj().T, P1, +1),
    ]
    terms = tuple(StepTerm(1.0, dl, h, q, str(i + 1)) for i, (h, q, dl) in enumerate(spec))
    return StepOperator("interf2_broken" if broken else "interf2", 9, 2, terms)


def builtin(name: str, **params) -> StepOperator:
    """Look up a builtin machine by name (``builtin:`` prefix accepted)."""
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    if name == "free":
        return free(**params)
    if name == "erasure":
        return erasure(**params)
    if name == "add1":
        return add1(**params)
    if name == "interf1":
        return interf1(**params)
    if name == "interf2":
        return interf2(**params)
    if name == "interf2_broken":
        return interf2(broken=True, **params)
    if name == "cycle":
        return cycle(**params)
    raise KeyError(f"unknown builtin machine {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


# ------------------------------------------------------------------ states

def product_state(dims: tuple[int, int], head_level: int, head_pos: int,
                  factors: Mapping[int, Sequence[complex]] = {}, fixed: Mapping[int, int] = {},
                  amp: complex = 1.0) -> WaveState:
    """Expand ``amp |head> (x)_site factor_site (x) |fixed levels>`` into the computation basis."""
    L, d = dims
    sites = sorted(factors)
    overlap = set(sites) & set(fixed)
    if overlap:
        raise ValueError(f"sites {sorted(overlap)} given both a factor and a fixed level")
    choices = []
    for site in sites:
        vec = np.asarray(factors[site], dtype=complex)
        if vec.shape != (d,):
            raise IncompatibleDimensionsError(f"factor at site {site} has shape {vec.shape}, expected ({d},)")
        choices.append([(int(k), complex(vec[k])) for k in np.flatnonzero(vec)])
    comps = {}
    for combo in itertools.product(*choices):
        mapping = dict(fixed)
        a = complex(amp)
        for site, (level, c) in zip(sites, combo):
            mapping[site] = level
            a *= c
        comps[BasisVector(head_level, head_pos, QuditLattice(d, mapping))] = a
    return WaveState(comps, dims)


def erasure_bt_state(n: int, b: int, tail: Mapping[int, int] | None = None, *, left_wall: int | None = None,
                     left_tail: Mapping[int, int] | None = None, convention: str = "head_site_plus") -> WaveState:
    """Path state of the erasure machine with the head at ``n`` and the ``|->`` wall at ``b``.

    ``convention="head_site_plus"`` (default) puts zeros strictly left of the
    head and ``|+>`` from the head site up to ``b - 1``; with it ``T`` maps the
    state at ``n`` onto the state at ``n + 1`` with weight exactly 1.
    ``convention="head_site_zero"`` also zeroes the head site.

    ``left_wall=a`` builds the finite-path variant: a level-1 qudit at ``a - 1``
    and arbitrary ``left_tail`` levels at sites ``<= a - 2``.
    """
    if n > b:
        raise ValueError(f"head position {n} is right of the wall {b}")
    tail = dict(tail or {})
    if any(site <= b for site in tail):
        raise ValueError("tail entries must sit right of the wall")
    if convention == "head_site_plus":
        first_plus = n
    elif convention == "head_site_zero":
        if n == b:
            raise ValueError("head_site_zero needs n < b")
        first_plus = n + 1
    else:
        raise ValueError(f"unknown convention {convention!r}")
    fixed = dict(tail)
    if left_wall is not None:
        if not left_wall <= n:
            raise ValueError("left wall must not be right of the head")
        fixed[left_wall - 1] = 1
        for site, level in (left_tail or {}).items():
            if site > left_wall - 2:
                raise ValueError("left_tail entries must sit at sites <= a - 2")
            fixed[site] = level
    plus = np.array([1.0, 1.0]) * SQRT1_2
    minus = np.array([1.0, -1.0]) * SQRT1_2
    factors = {site: plus for site in range(first_plus, b)}
    factors[b] = minus
    return product_state((1, 2), 0, n, factors, fixed)


def add1_initial_state(marker_sites: Sequence[int], head_pos: int | None = None) -> WaveState:
    """Head level 0 at ``head_pos`` (default: first marker), level-2 markers, zeros elsewhere."""
    markers = [int(m) for m in marker_sites]
    if not markers:
        raise ValueError("at least one marker is required")
    if any(b <= a for a, b in zip(markers, markers[1:])):
        raise ValueError("marker sites must be strictly increasing")
    if head_pos is None:
        head_pos = markers[0]
    if head_pos > markers[0]:
        raise ValueError("head must start at or left of the first marker")
    lattice = QuditLattice(3, {m: 2 for m in markers})
    return WaveState({BasisVector(0, head_pos, lattice): 1.0}, (4, 3))


def add1_final_state(n: int, v=None) -> WaveState:
    """Closed form of ``T^(3n+4)`` applied to the two-marker seed (markers 0 and n+1, head at 0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = check_unitary(HADAMARD if v is None else v)
    v0 = v[:, 0]
    parts = []
    for j in range(n + 1):
        coeff = (v[0, 0] if j < n else 1.0) * v[1, 0] ** j
        fixed = {0: 2, n + 1: 2}
        if j < n:
            fixed[n - j] = 1
        factors = {site: v0 for site in range(1, n - j)}
        parts.append(product_state((4, 3), 0, 3 * n + 2 - 2 * j,
                                   {s: np.append(f, 0.0) for s, f in factors.items()}, fixed, coeff))
    comps = {}
    for p in parts:
        for b, a in p.items():
            comps[b] = comps.get(b, 0j) + a
    return WaveState(comps, (4, 3))


def interf1_seed(z: int, head_pos: int = 0) -> WaveState:
    """Head level 0 left of site 1, level-1 qudits at sites 1 and ``2 + z``."""
    if z < 0:
        raise ValueError("gap z must be >= 0")
    if head_pos >= 1:
        raise ValueError("head must start left of site 1")
    lattice = QuditLattice(2, {1: 1, 2 + z: 1})
    return WaveState({BasisVector(0, head_pos, lattice): 1.0}, (3, 2))


def interf2_seed() -> WaveState:
    """Head level 0 at site 0 over the pattern 1, 0, 1 at sites 1..3."""
    return interf2_chain_seed(1)


def interf2_chain_seed(n: int, gap: int = 1) -> WaveState:
    """``n`` copies of the 1, 0, 1 pattern separated by ``gap`` zeros, head level 0 at site 0."""
    if n < 1 or gap < 1:
        raise ValueError("need n >= 1 and gap >= 1")
    sites = {}
    j = 1
    for _ in range(n):
        sites[j] = 1
        sites[j + 2] = 1
        j += 3 + gap
    return WaveState({BasisVector(0, 0, QuditLattice(2, sites)): 1.0}, (9, 2))


def interf2_single_seed(j: int = 1) -> WaveState:
    """Head level 0 at site 0 with a single level-1 qudit at site ``j > 0``."""
    if j <= 0:
        raise ValueError("j must be positive")
    return WaveState({BasisVector(0, 0, QuditLattice(2, {j: 1})): 1.0}, (9, 2))


def interferometer_seed(kind: str, z: int = 0) -> WaveState:
    if kind == "interf1":
        return interf1_seed(z)
    if kind == "interf2":
        return interf2_seed()
    raise ValueError(f"unknown interferometer kind {kind!r}")


# --------------------------------------------------------------------- I/O

def _matrix_to_json(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _matrix_from_json(data, n: int, what: str) -> np.ndarray:
    try:
        M = np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise MachineFormatError(f"{what}: entries must be [re, im] pairs ({exc})") from None
    if M.shape != (n, n):
        raise IncompatibleDimensionsError(f"{what}: shape {M.shape} != ({n}, {n})")
    return M


def machine_to_dict(T: StepOperator) -> dict:
    return {
        "name": T.name,
        "head_dim": T.L,
        "qudit_dim": T.d,
        "terms": [{"gamma": t.gamma, "delta": t.delta, "head": _matrix_to_json(t.head),
                   "qubit": _matrix_to_json(t.qubit), "label": t.label} for t in T.terms],
    }


def machine_from_dict(data: Mapping) -> StepOperator:
    try:
        L, d = int(data["head_dim"]), int(data["qudit_dim"])
        raw_terms = data["terms"]
        name = str(data.get("name", "machine"))
    except (KeyError, TypeError, ValueError) as exc:
        raise MachineFormatError(f"machine file missing or invalid field: {exc}") from None
    terms = []
    for i, t in enumerate(raw_terms):
        try:
            gamma, delta = float(t["gamma"]), int(t["delta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MachineFormatError(f"term {i}: missing or invalid field {exc}") from None
        head = _matrix_from_json(t["head"], L, f"term {i} head matrix")
        qubit = _matrix_from_json(t["qubit"], d, f"term {i} qubit matrix")
        try:
            terms.append(StepTerm(gamma, delta, head, qubit, str(t.get("label", ""))))
        except ValueError as exc:
            raise MachineFormatError(f"term {i}: {exc}") from None
    return StepOperator(name, L, d, tuple(terms))


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise MachineFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}") from None


def load_machine(path) -> StepOperator:
    return machine_from_dict(_load_json(path))


def save_machine(T: StepOperator, path) -> None:
    Path(path).write_text(json.dumps(machine_to_dict(T), indent=1) + "\n")


def load_state(path, dims: tuple[int, int] | None = None) -> WaveState:
    data = _load_json(path)
    try:
        return state_from_dict(data, dims)
    except (KeyError, TypeError) as exc:
        raise MachineFormatError(f"{path}: malformed state: {exc}") from None


def save_state(psi: WaveState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(psi), indent=1) + "\n")
