"""Step operators built from elementary terms, their adjoints and ``H = K(2 - T - T^dagger)``.

Each term is ``(gamma, delta, head_matrix, qubit_matrix)`` and acts on a basis
vector ``|l, j, s>`` (with ``s_j`` the scanned level) as::

    gamma * sum_{l', s'} head[l', l] * qubit[s', s_j] * |l', j + delta, s with site j -> s'>

The qubit matrix always acts on the site the head occupies *before* it moves.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    BasisVector,
    IncompatibleDimensionsError,
    QuditLattice,
    WaveState,
    superpose,
)

EPS_ZERO = 1e-12
DELTAS = (-1, 0, 1)


@dataclass(frozen=True, eq=False)
class StepTerm:
    gamma: float
    delta: int
    head: np.ndarray
    qubit: np.ndarray
    label: str = ""

    def __post_init__(self):
        gamma = float(self.gamma)
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.delta not in DELTAS:
            raise ValueError(f"delta must be -1, 0 or +1, got {self.delta}")
        head = np.array(self.head, dtype=complex)
        qubit = np.array(self.qubit, dtype=complex)
        if head.ndim != 2 or head.shape[0] != head.shape[1]:
            raise ValueError(f"head matrix must be square, got shape {head.shape}")
        if qubit.ndim != 2 or qubit.shape[0] != qubit.shape[1]:
            raise ValueError(f"qubit matrix must be square, got shape {qubit.shape}")
        head.setflags(write=False)
        qubit.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", int(self.delta))
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "qubit", qubit)

    def __eq__(self, other):
        if not isinstance(other, StepTerm):
            return NotImplemented
        return (self.gamma == other.gamma and self.delta == other.delta and self.label == other.label
                and np.array_equal(self.head, other.head) and np.array_equal(self.qubit, other.qubit))

    __hash__ = None

    def transitions(self, l: int, s: int) -> list[tuple[int, int, complex]]:
        """Non-zero ``(l', s', amplitude)`` produced from head level ``l`` over level ``s``."""
        out = []
        hcol = self.head[:, l]
        qcol = self.qubit[:, s]
        for s2 in np.flatnonzero(qcol):
            for l2 in np.flatnonzero(hcol):
                out.append((int(l2), int(s2), self.gamma * hcol[l2] * qcol[s2]))
        return out

    def weight(self, l: int, s: int) -> float:
        """Norm of the term's output on a basis vector with head level ``l`` over level ``s``."""
        return self.gamma * float(np.linalg.norm(self.head[:, l]) * np.linalg.norm(self.qubit[:, s]))


@dataclass(frozen=True, eq=False)
class StepOperator:
    """A machine: named finite list of step terms for head dimension ``L`` and qudit dimension ``d``."""

    name: str
    L: int
    d: int
    terms: tuple[StepTerm, ...]
    _fwd: dict = field(init=False, repr=False)
    _adj: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("head dimension L must be >= 1")
        if self.d < 2:
            raise ValueError("qudit dimension d must be >= 2")
        terms = tuple(self.terms)
        for i, t in enumerate(terms):
            if t.head.shape != (self.L, self.L):
                raise IncompatibleDimensionsError(f"term {i}: head matrix {t.head.shape} != ({self.L}, {self.L})")
            if t.qubit.shape != (self.d, self.d):
                raise IncompatibleDimensionsError(f"term {i}: qubit matrix {t.qubit.shape} != ({self.d}, {self.d})")
        object.__setattr__(self, "terms", terms)

        # (l, s) -> [(l', delta, s', amp)] and (l', delta, s') -> [(l, s, conj amp)]
        fwd: dict[tuple[int, int], dict[tuple[int, int, int], complex]] = {}
        for t in terms:
            for l in range(self.L):
                for s in range(self.d):
                    for l2, s2, a in t.transitions(l, s):
                        col = fwd.setdefault((l, s), {})
                        key = (l2, t.delta, s2)
                        col[key] = col.get(key, 0j) + a
        fwd_lists = {}
        adj: dict[tuple[int, int, int], list] = {}
        for (l, s), col in fwd.items():
            items = [(l2, dl, s2, a) for (l2, dl, s2), a in col.items() if a != 0]
            if items:
                fwd_lists[(l, s)] = tuple(items)
            for l2, dl, s2, a in items:
                adj.setdefault((l2, dl, s2), []).append((l, s, a.conjugate()))
        object.__setattr__(self, "_fwd", fwd_lists)
        object.__setattr__(self, "_adj", {k: tuple(v) for k, v in adj.items()})

    @property
    def dims(self) -> tuple[int, int]:
        return (self.L, self.d)

    def __eq__(self, other):
        if not isinstance(other, StepOperator):
            return NotImplemented
        return (self.name, self.L, self.d, self.terms) == (other.name, other.L, other.d, other.terms)

    __hash__ = None

    def basis_state(self, head_level: int, head_pos: int, lattice=None) -> WaveState:
        if lattice is None:
            lattice = QuditLattice(self.d)
        elif not isinstance(lattice, QuditLattice):
            lattice = QuditLattice(self.d, lattice)
        return WaveState({BasisVector(head_level, head_pos, lattice): 1.0}, self.dims)


_bv = tuple.__new__  # skips the NamedTuple constructor in hot loops


def _check(T: StepOperator, psi: WaveState) -> None:
    if psi.dims != T.dims:
        raise IncompatibleDimensionsError(f"state dims {psi.dims} do not match machine {T.name!r} dims {T.dims}")


def apply(T: StepOperator, psi: WaveState) -> WaveState:
    """``T psi``."""
    _check(T, psi)
    fwd = T._fwd
    acc: dict[BasisVector, complex] = {}
    get = acc.get
    for b, amp in psi.items():
        l, j, lat = b
        outs = fwd.get((l, lat._map.get(j, 0)))
        if outs is None:
            continue
        written = {}
        for l2, dl, s2, c in outs:
            lat2 = written.get(s2)
            if lat2 is None:
                lat2 = written[s2] = lat.set(j, s2)
            key = _bv(BasisVector, (l2, j + dl, lat2))
            acc[key] = get(key, 0j) + c * amp
    return WaveState(acc, psi.dims, psi.prune_eps, _trusted=True)


def apply_adjoint(T: StepOperator, phi: WaveState) -> WaveState:
    """``T^dagger phi``; the scanned site of each term is ``j' - delta``."""
    _check(T, phi)
    adj = T._adj
    acc: dict[BasisVector, complex] = {}
    get = acc.get
    for b, amp in phi.items():
        l2, j2, lat = b
        for dl in DELTAS:
            j = j2 - dl
            ins = adj.get((l2, dl, lat._map.get(j, 0)))
            if ins is None:
                continue
            written = {}
            for l, s, c in ins:
                lat1 = written.get(s)
                if lat1 is None:
                    lat1 = written[s] = lat.set(j, s)
                key = _bv(BasisVector, (l, j, lat1))
                acc[key] = get(key, 0j) + c * amp
    return WaveState(acc, phi.dims, phi.prune_eps, _trusted=True)


def hamiltonian_apply(T: StepOperator, K: float, psi: WaveState) -> WaveState:
    """``K (2 psi - T psi - T^dagger psi)``."""
    if K <= 0:
        raise ValueError("K must be positive")
    return superpose([(2.0 * K, psi), (-K, apply(T, psi)), (-K, apply_adjoint(T, psi))])


# ------------------------------------------------------- reduced matrix

def row_index(T: StepOperator, l_out: int, delta: int, s_out: int) -> int:
    return (l_out * 3 + delta + 1) * T.d + s_out


def col_index(T: StepOperator, l_in: int, s_in: int) -> int:
    return l_in * T.d + s_in


def reduced_matrix(T: StepOperator) -> np.ndarray:
    """Matrix of the local step with the head fixed at site 0.

    Rows are ``(l', delta, s')`` (see :func:`row_index`), columns ``(l, s)``;
    shape ``(3 L d, L d)``.
    """
    M = np.zeros((3 * T.L * T.d, T.L * T.d), dtype=complex)
    for t in T.terms:
        for l in range(T.L):
            for s in range(T.d):
                for l2, s2, a in t.transitions(l, s):
                    M[row_index(T, l2, t.delta, s2), col_index(T, l, s)] += a
    return M


@dataclass
class BasisDpgDecision:
    decision: bool
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.decision


def check_dpg_computation_basis(T: StepOperator, eps_zero: float = EPS_ZERO) -> BasisDpgDecision:
    """Decide whether ``T`` is distinct path generating in the computation basis.

    A column of the full matrix is a basis vector ``|l, 0, s>``; its entries are
    exactly the non-zeros of reduced-matrix column ``(l, s_0)``.  A row is an
    output ``|l', 0, s'>``; the term with shift ``delta`` reaches it from head
    site ``-delta`` and writes site ``-delta``, so the three shifts see three
    independent lattice sites.  The worst row therefore has
    ``sum_delta max_s' nnz(row (l', delta, s'))`` entries.
    """
    M = reduced_matrix(T)
    nz = np.abs(M) > eps_zero
    for l in range(T.L):
        for s in range(T.d):
            c = col_index(T, l, s)
            rows = np.flatnonzero(nz[:, c])
            if len(rows) > 1:
                outs = []
                for r in rows:
                    l2, rest = divmod(int(r), 3 * T.d)
                    di, s2 = divmod(rest, T.d)
                    outs.append({"head_level": l2, "delta": di - 1, "qudit": s2, "value": _pair(M[r, c])})
                return BasisDpgDecision(False, {"kind": "column", "input": {"head_level": l, "qudit": s},
                                                "entries": outs})
    for l2 in range(T.L):
        chosen = []
        total = 0
        for delta in DELTAS:
            best, best_s2 = 0, None
            for s2 in range(T.d):
                cnt = int(nz[row_index(T, l2, delta, s2)].sum())
                if cnt > best:
                    best, best_s2 = cnt, s2
            if best:
                chosen.append((delta, best_s2))
                total += best
        if total > 1:
            entries = []
            for delta, s2 in chosen:
                r = row_index(T, l2, delta, s2)
                for c in np.flatnonzero(nz[r]):
                    l, s = divmod(int(c), T.d)
                    entries.append({"delta": delta, "qudit_out": s2, "head_level_in": l, "qudit_in": s,
                                    "value": _pair(M[r, c])})
            return BasisDpgDecision(False, {"kind": "row", "output": {"head_level": l2}, "entries": entries})
    return BasisDpgDecision(True, None)


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


# ------------------------------------------------ structural regression

@dataclass
class HomogeneityReport:
    ok: bool
    samples: int
    witness: dict | None = None


def random_basis_vector(T: StepOperator, rng: random.Random, span: int = 6, max_sites: int = 4) -> BasisVector:
    n = rng.randint(0, max_sites)
    sites = rng.sample(range(-span, span + 1), n)
    lattice = QuditLattice(T.d, {s: rng.randrange(1, T.d) for s in sites})
    return BasisVector(rng.randrange(T.L), rng.randint(-span + 1, span - 1), lattice)


def check_homogeneity_locality(T: StepOperator, samples: int = 100, seed: int = 0,
                               apply_fn: Callable[[StepOperator, WaveState], WaveState] = apply,
                               tol: float = 1e-14) -> HomogeneityReport:
    """Probe random basis vectors for one-site locality, bounded head motion and translation invariance.

    ``apply_fn`` exists so a deliberately broken application can be checked.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = random.Random(seed)
    for _ in range(samples):
        b = random_basis_vector(T, rng)
        out = apply_fn(T, WaveState({b: 1.0}, T.dims))
        for b2, a in out.items():
            if abs(b2.head_pos - b.head_pos) > 1:
                return HomogeneityReport(False, samples, {"check": "head_motion", "input": b, "output": b2})
            changed = set(b.lattice.as_dict().items()) ^ set(b2.lattice.as_dict().items())
            if any(site != b.head_pos for site, _ in changed):
                return HomogeneityReport(False, samples, {"check": "locality", "input": b, "output": b2})
        k = rng.choice([-5, -3, -1, 1, 2, 7])
        moved = apply_fn(T, WaveState({b.shifted(k): 1.0}, T.dims))
        expected = out.shifted(k)
        keys = set(moved) | set(expected)
        diff = max((abs(moved[x] - expected[x]) for x in keys), default=0.0)
        if diff > tol:
            return HomogeneityReport(False, samples, {"check": "translation", "input": b, "shift": k,
                                                      "defect": diff})
    return HomogeneityReport(True, samples, None)


@dataclass
class TermActivityReport:
    active: dict[BasisVector, tuple[str, ...]]
    max_active: int
    witness: BasisVector | None = None


def term_labels(T: StepOperator) -> list[str]:
    return [t.label or str(i + 1) for i, t in enumerate(T.terms)]


def active_terms(T: StepOperator, b: BasisVector, eps: float = EPS_ZERO) -> tuple[str, ...]:
    labels = term_labels(T)
    s = b.scanned
    return tuple(labels[i] for i, t in enumerate(T.terms) if t.weight(b.head_level, s) > eps)


def term_activity(T: StepOperator, psi: WaveState, eps: float = EPS_ZERO) -> TermActivityReport:
    """Which terms act on each component of ``psi``, and the largest number acting at once."""
    _check(T, psi)
    active = {}
    best, witness = 0, None
    for b in psi.support():
        act = active_terms(T, b, eps)
        active[b] = act
        if len(act) > best:
            best, witness = len(act), b
    return TermActivityReport(active, best, witness if best > 1 else None)

