"""Spectra of ``H = K(2 - T - T^dagger)`` on paths, time evolution and series amplitudes."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import expm_multiply

from .core import BasisVector, WaveState, inner_product, superpose
from .operators import StepOperator, StepTerm, apply, apply_adjoint, hamiltonian_apply
from .paths import PathRecord, UnverifiedPathError

DENSE_LIMIT = 3000
UNIT_TOL = 1e-12


class WindowLeakWarning(RuntimeWarning):
    """Evolution amplitude reached the edge of the truncated subspace."""

    def __init__(self, message: str, mass: float):
        super().__init__(message)
        self.mass = mass


def _check_K(K: float) -> float:
    K = float(K)
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    return K


# ------------------------------------------------------------ path spectra

@dataclass
class PathHamiltonian:
    """``H`` restricted to the states of one path, in the path basis."""

    n: int
    K: float
    diag: np.ndarray
    offdiag: np.ndarray
    boundary: str
    matrix: np.ndarray
    weights: np.ndarray
    cycle_phase: complex = 1.0
    truncated: tuple[bool, bool] = (False, False)

    @property
    def unit_weights(self) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0) < UNIT_TOL))


def tridiagonal_hamiltonian(weights, K: float = 1.0, cyclic: bool = False, phase: complex = 1.0) -> PathHamiltonian:
    """Build ``K(2 - T - T^dagger)`` for a weighted shift on ``n`` states.

    For an open path ``weights`` has ``n - 1`` entries (bond ``k -> k+1``); for
    a cycle it has ``n`` entries, the last closing ``n-1 -> 0`` with ``phase``.
    """
    K = _check_K(K)
    w = np.asarray(weights, dtype=float)
    n = len(w) if cyclic else len(w) + 1
    if n < 1:
        raise ValueError("a path needs at least one state")
    shift = np.zeros((n, n), dtype=complex)
    for k in range(n - 1):
        shift[k + 1, k] = w[k]
    if cyclic:
        shift[0, n - 1] += w[n - 1] * phase
    H = K * (2.0 * np.eye(n) - shift - shift.conj().T)
    off = -K * w[: n - 1]
    return PathHamiltonian(n, K, np.real(np.diag(H)).copy(), off, "cyclic" if cyclic else "open", H, w,
                           complex(phase))


def path_hamiltonian(path: PathRecord, K: float = 1.0) -> PathHamiltonian:
    """Restriction of ``H`` to a verified path; terminal ends are hard walls."""
    if not path.verified:
        raise UnverifiedPathError("path has not passed verify_distinct_path")
    if path.cyclic is not None:
        h = tridiagonal_hamiltonian(path.weights[: path.cyclic], K, cyclic=True, phase=path.cycle_phase)
    else:
        h = tridiagonal_hamiltonian(path.weights[: len(path) - 1], K)
        h.truncated = (not path.backward_terminal, not path.forward_terminal)
    return h


@dataclass
class FormulaComparison:
    name: str
    k_values: list[float]
    energies: list[float]
    agrees: bool
    count_matches: bool
    max_deviation: float | None
    note: str = ""


@dataclass
class Eigensystem:
    energies: np.ndarray
    vectors: np.ndarray
    formulas: list[FormulaComparison] = field(default_factory=list)

    def formula(self, name: str) -> FormulaComparison:
        for f in self.formulas:
            if f.name == name:
                return f
        raise KeyError(name)


def _compare(name: str, ks, numeric: np.ndarray, K: float, note: str = "", tol: float = 1e-10) -> FormulaComparison:
    ks = [float(k) for k in ks]
    energies = sorted(2 * K * (1 - math.cos(k)) for k in ks)
    count = len(energies) == len(numeric)
    if energies:
        # nearest numeric level for each formula level
        dev = max(float(np.min(np.abs(numeric - e))) for e in energies)
    else:
        dev = None
    if count and energies:
        dev = max(dev, float(np.max(np.abs(np.sort(numeric) - np.array(energies)))))
    agrees = count and dev is not None and dev < tol
    return FormulaComparison(name, ks, energies, agrees, count, dev, note)


def eigensystem(h: PathHamiltonian) -> Eigensystem:
    """Numeric eigenpairs, plus closed-form level sets compared against them.

    The numeric spectrum is authoritative.  For open paths with unit weights
    two closed forms are reported: ``wall_quantization`` with
    ``k = 2 pi m / (N - 1)``, ``m = 1..N-2`` for ``N`` path states, and
    ``standing_wave`` with ``k = pi m / (N + 1)``, ``m = 1..N``.  Cycles get
    ``k = (2 pi m + arg phase) / N``.
    """
    if h.boundary == "open":
        if h.n == 1:
            energies, vectors = np.array([h.diag[0]]), np.ones((1, 1))
        else:
            energies, vectors = linalg.eigh_tridiagonal(h.diag, h.offdiag)
    else:
        energies, vectors = linalg.eigh(h.matrix)
    out = Eigensystem(energies, vectors)
    if not h.unit_weights:
        return out
    N, K = h.n, h.K
    if h.boundary == "open":
        span = N - 1
        wall = [2 * math.pi * m / span for m in range(1, span)] if span > 0 else []
        out.formulas.append(_compare("wall_quantization", wall, energies, K,
                                     "k = 2 pi m / (b - a), m = 1..b-a-1"))
        out.formulas.append(_compare("standing_wave", [math.pi * m / (N + 1) for m in range(1, N + 1)], energies, K,
                                     "k = pi m / (N + 1), m = 1..N"))
    else:
        theta = cmath.phase(h.cycle_phase)
        out.formulas.append(_compare("cyclic", [(2 * math.pi * m + theta) / N for m in range(N)], energies, K,
                                     "k = (2 pi m + arg phase) / N, m = 0..N-1"))
    return out


# --------------------------------------------------------------- evolution

CANCEL_TOL = 1e-12


def _magnitude_operator(T: StepOperator) -> StepOperator:
    """``T`` with every matrix entry replaced by its modulus."""
    terms = tuple(StepTerm(t.gamma, t.delta, np.abs(t.head), np.abs(t.qubit), t.label) for t in T.terms)
    return StepOperator(T.name + "|abs|", T.L, T.d, terms)


def _layer_closure(T: StepOperator, K: float, psi0: WaveState, depth: int, window: int | None):
    """Union of the supports of ``H^k psi0``, ``k <= depth``.

    A component is dropped only when it cancels: its modulus is below
    ``CANCEL_TOL`` times the summed moduli of its contributions.  Small but
    genuine amplitudes (the far tail of a spreading packet) are kept.
    """
    basis: dict[BasisVector, int] = {}
    order: list[BasisVector] = []
    absT = _magnitude_operator(T)

    def add(psi):
        for b in psi.support():
            if b not in basis:
                basis[b] = len(order)
                order.append(b)

    def inside(b):
        return _inside(b, window)

    v = psi0.restricted(inside)
    add(v)
    for _ in range(depth):
        out = superpose([(2.0 * K, v), (-K, apply(T, v)), (-K, apply_adjoint(T, v))], prune_eps=0.0)
        a = WaveState({b: abs(x) for b, x in v.items()}, v.dims, prune_eps=0.0, _trusted=True)
        scale = superpose([(2.0 * K, a), (K, apply(absT, a)), (K, apply_adjoint(absT, a))], prune_eps=0.0)
        kept = {b: x for b, x in out.items() if inside(b) and abs(x) > CANCEL_TOL * scale[b].real}
        if not kept:
            break
        top = max(abs(x) for x in kept.values())
        v = WaveState({b: x / top for b, x in kept.items()}, v.dims, prune_eps=0.0, _trusted=True)
        add(v)
    return order, basis


def _inside(b: BasisVector, window: int | None) -> bool:
    if window is None:
        return True
    return abs(b.head_pos) <= window and all(abs(s) <= window for s in b.lattice.support())


class Propagator:
    """``exp(-iHt)`` on the subspace spanned by the support of ``H^k psi0``, ``k <= depth``.

    The matrix of ``H`` is compressed onto that subspace; the norm of the
    part of ``H psi(t)`` leaving it is reported as leakage.
    """

    def __init__(self, T: StepOperator, K: float, psi0: WaveState, depth: int, window: int | None = None):
        self.T, self.K = T, _check_K(K)
        self.dims = psi0.dims
        self.order, self.index = _layer_closure(T, self.K, psi0, depth, window)
        n = len(self.order)
        rows, cols, vals = [], [], []
        for j, b in enumerate(self.order):
            col = hamiltonian_apply(T, self.K, WaveState({b: 1.0 + 0j}, self.dims, _trusted=True))
            for b2, a in col.items():
                i = self.index.get(b2)
                if i is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(a)
        self.H = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
        self._eig = None
        self.psi0 = self.to_vector(psi0)

    @property
    def dim(self) -> int:
        return len(self.order)

    def to_vector(self, psi: WaveState) -> np.ndarray:
        x = np.zeros(self.dim, dtype=complex)
        for b, a in psi.items():
            i = self.index.get(b)
            if i is None:
                raise ValueError(f"basis vector {b} is outside the evolution subspace")
            x[i] = a
        return x

    def to_state(self, x: np.ndarray) -> WaveState:
        return WaveState(zip(self.order, x), self.dims, _trusted=True)

    def _vector_at(self, t: float) -> np.ndarray:
        if t == 0:
            return self.psi0.copy()
        if self.dim <= DENSE_LIMIT:
            if self._eig is None:
                self._eig = linalg.eigh(self.H.toarray())
            w, V = self._eig
            return V @ (np.exp(-1j * w * t) * (V.conj().T @ self.psi0))
        return expm_multiply(-1j * t * self.H.tocsc(), self.psi0)

    def leak(self, x: np.ndarray) -> float:
        """Norm of the part of ``H x`` outside the subspace."""
        full = hamiltonian_apply(self.T, self.K, self.to_state(x))
        return math.sqrt(sum(abs(a) ** 2 for b, a in full.items() if b not in self.index))

    def evolve(self, t: float, leak_tol: float = 1e-10) -> WaveState:
        x = self._vector_at(float(t))
        mass = self.leak(x) * abs(t)
        if mass > leak_tol:
            warnings.warn(WindowLeakWarning(
                f"evolution leaks {mass:.3g} out of the truncated subspace; increase depth or window", mass),
                stacklevel=2)
        return self.to_state(x)


def default_depth(K: float, t: float) -> int:
    return 2 * math.ceil(abs(K * t)) + 20


def evolve(T: StepOperator, K: float, psi0: WaveState, t: float, depth: int | None = None,
           window: int | None = None, leak_tol: float = 1e-10) -> WaveState:
    """``exp(-iHt) psi0`` by spectral decomposition on a truncated subspace.

    A :class:`WindowLeakWarning` carries an estimate of the amplitude lost
    at the truncation edge.
    """
    if t == 0:
        return psi0
    if depth is None:
        depth = default_depth(K, t)
    return Propagator(T, K, psi0, depth, window).evolve(t, leak_tol)


def energy(T: StepOperator, K: float, psi: WaveState) -> float:
    return inner_product(psi, hamiltonian_apply(T, K, psi)).real


# ----------------------------------------------------------- series amplitudes

def _as_state(T: StepOperator, b) -> WaveState:
    if isinstance(b, WaveState):
        return b
    if isinstance(b, BasisVector):
        return WaveState({b: 1.0}, T.dims)
    raise TypeError(f"expected BasisVector or WaveState, got {type(b).__name__}")


def hamiltonian_power_elements(T: StepOperator, K: float, b, b_out, n_max: int) -> list[complex]:
    """``[<b_out|H^n|b> for n = 0..n_max]`` by repeated sparse application."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    v, target = _as_state(T, b), _as_state(T, b_out)
    out = [inner_product(target, v)]
    for _ in range(n_max):
        v = hamiltonian_apply(T, K, v)
        out.append(inner_product(target, v))
    return out


def pathsum_amplitude(T: StepOperator, K: float, b, b_out, t: float, n_max: int) -> complex:
    """Truncated series ``sum_{n <= n_max} (-it)^n / n! <b_out|H^n|b>``."""
    elems = hamiltonian_power_elements(T, K, b, b_out, n_max)
    total, c = 0j, 1.0 + 0j
    for n, e in enumerate(elems):
        if n:
            c *= -1j * t / n
        total += c * e
    return total


def pathsum_state(T: StepOperator, K: float, psi0, t: float, n_max: int) -> WaveState:
    """Truncated series ``sum_{n <= n_max} (-it)^n / n! H^n psi0`` as a state."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    v = _as_state(T, psi0)
    acc = [(1.0, v)]
    c = 1.0 + 0j
    for n in range(1, n_max + 1):
        v = hamiltonian_apply(T, K, v)
        c *= -1j * t / n
        acc.append((c, v))
    return superpose(acc)
