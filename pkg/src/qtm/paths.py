"""Paths generated by iterating ``T`` and ``T^dagger``, and empirical checks of distinct path generation.

A path is stored as normalised states indexed ``k = m_min .. m_max`` with the
seed at ``k = 0``.  Everything here is bounded evidence: an undetected
terminal state within the iteration bounds is reported as a truncation, not
as an infinite path.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .core import BasisVector, WaveState, inner_product, overlap_index, superpose
from .operators import StepOperator, apply, apply_adjoint

EPS_ORTH = 1e-9
EPS_TERMINAL = 1e-12
WEIGHT_FLOOR = 1e-6

CLASSIFICATIONS = ("finite", "right_truncated", "left_truncated", "two_way_truncated", "cyclic")


class WindowOverflowError(RuntimeError):
    """An operator application left the truncation window."""


class UnverifiedPathError(ValueError):
    """A path was used where a verified distinct path is required."""


@dataclass
class DpgReport:
    orthogonal: bool
    max_cross_overlap: float
    backstep_ok: bool
    forwardstep_ok: bool
    max_backstep_defect: float = 0.0
    max_forwardstep_defect: float = 0.0
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.orthogonal and self.backstep_ok and self.forwardstep_ok


@dataclass
class PathRecord:
    states: list[WaveState]
    weights: list[float]
    m_min: int
    forward_terminal: bool
    backward_terminal: bool
    cyclic: int | None = None
    cycle_phase: complex = 1.0
    classification: str = "two_way_truncated"
    revisit: tuple[int, int] | None = None
    dpg: DpgReport | None = field(default=None, repr=False)

    @property
    def m_max(self) -> int:
        return self.m_min + len(self.states) - 1

    @property
    def indices(self) -> range:
        return range(self.m_min, self.m_max + 1)

    def state(self, k: int) -> WaveState:
        if not self.m_min <= k <= self.m_max:
            raise IndexError(f"path index {k} outside {self.m_min}..{self.m_max}")
        return self.states[k - self.m_min]

    def weight(self, k: int) -> float:
        """``||T state_k||``."""
        return self.weights[k - self.m_min]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def verified(self) -> bool:
        return self.dpg is not None and self.dpg.ok


def _match(index: dict[BasisVector, list[int]], states: list[WaveState], psi: WaveState,
           eps_orth: float) -> tuple[int, complex] | None:
    """Earlier state equal to ``psi`` up to a global phase, as ``(position, <earlier|psi>)``."""
    seen = set()
    for b in psi:
        for i in index.get(b, ()):
            if i in seen:
                continue
            seen.add(i)
            ov = inner_product(states[i], psi)
            if abs(ov) > 1.0 - eps_orth:
                return i, ov
    return None


def _classify(forward_terminal: bool, backward_terminal: bool, cyclic: int | None) -> str:
    if cyclic is not None:
        return "cyclic"
    if forward_terminal and backward_terminal:
        return "finite"
    if forward_terminal:
        return "left_truncated"
    if backward_terminal:
        return "right_truncated"
    return "two_way_truncated"


def generate_path(T: StepOperator, seed: WaveState, fwd: int, bwd: int,
                  eps_terminal: float = EPS_TERMINAL, eps_orth: float = EPS_ORTH) -> PathRecord:
    """Iterate ``T`` up to ``fwd`` times and ``T^dagger`` up to ``bwd`` times from ``seed``.

    Iteration stops early at a terminal state (norm below ``eps_terminal``)
    or when a state repeats an earlier one up to phase.  A repeat of the seed
    marks the path cyclic.
    """
    if fwd < 0 or bwd < 0:
        raise ValueError("fwd and bwd must be >= 0")
    if seed.norm() == 0:
        raise ValueError("seed has norm 0")
    cur = seed.normalized()
    forward = [cur]
    index: dict[BasisVector, list[int]] = {}
    pool: list[WaveState] = [cur]
    for b in cur:
        index.setdefault(b, []).append(0)

    def remember(psi):
        pos = len(pool)
        pool.append(psi)
        for b in psi:
            index.setdefault(b, []).append(pos)

    fwd_weights = []
    forward_terminal = False
    cyclic = None
    phase = 1.0 + 0j
    revisit = None
    for n in range(fwd + 1):
        nxt = apply(T, cur)
        w = nxt.norm()
        fwd_weights.append(w)
        if w < eps_terminal:
            forward_terminal = True
            break
        if n == fwd:
            break
        nxt = nxt.scaled(1.0 / w)
        hit = _match(index, pool, nxt, eps_orth)
        if hit is not None:
            pos, ov = hit
            if pos == 0:
                cyclic, phase = n + 1, ov
            else:
                revisit = (n + 1, pos)
                forward.append(nxt)
                fwd_weights.append(apply(T, nxt).norm())
            break
        forward.append(nxt)
        remember(nxt)
        cur = nxt

    backward = []
    bwd_weights = []
    backward_terminal = False
    if cyclic is None and revisit is None:
        cur = forward[0]
        for n in range(bwd + 1):
            prv = apply_adjoint(T, cur)
            w = prv.norm()
            if w < eps_terminal:
                backward_terminal = True
                break
            if n == bwd:
                break
            prv = prv.scaled(1.0 / w)
            hit = _match(index, pool, prv, eps_orth)
            backward.append(prv)
            bwd_weights.append(apply(T, prv).norm())
            if hit is not None:
                revisit = (-(n + 1), hit[0])
                break
            remember(prv)
            cur = prv

    states = backward[::-1] + forward
    weights = bwd_weights[::-1] + fwd_weights
    path = PathRecord(states=states, weights=weights, m_min=-len(backward),
                      forward_terminal=forward_terminal, backward_terminal=backward_terminal,
                      cyclic=cyclic, cycle_phase=phase,
                      classification=_classify(forward_terminal, backward_terminal, cyclic), revisit=revisit)
    interior = weights if cyclic is not None else weights[:-1] if forward_terminal else weights
    low = [w for w in interior if w < WEIGHT_FLOOR]
    if low:
        warnings.warn(f"path weight {min(low):.3g} below {WEIGHT_FLOOR:g}", RuntimeWarning, stacklevel=2)
    return path


def _proportionality_defect(target: WaveState, x: WaveState, require_positive: bool) -> tuple[float, complex]:
    """Relative distance of ``x`` from the ray of unit vector ``target``."""
    nx = x.norm()
    if nx == 0:
        return 1.0, 0j
    c = inner_product(target, x)
    resid = superpose([(1.0, x), (-c, target)], prune_eps=0.0).norm() / nx
    if require_positive:
        if c.real <= 0:
            return max(resid, 1.0), c
        resid = max(resid, abs(c.imag) / abs(c))
    return resid, c


def verify_distinct_path(T: StepOperator, path: PathRecord, eps_orth: float = EPS_ORTH) -> DpgReport:
    """Check pairwise orthogonality and one-step consistency of a generated path.

    The report is also stored on ``path.dpg``.
    """
    ks = list(path.indices)
    states = path.states
    worst, witness = 0.0, None
    index = overlap_index(states)
    checked = set()
    for members in index.values():
        for i, j in itertools.combinations(members, 2):
            if (i, j) in checked:
                continue
            checked.add((i, j))
            ov = abs(inner_product(states[i], states[j]))
            if ov > worst:
                worst = ov
                if ov >= eps_orth:
                    witness = {"check": "orthogonality", "k": ks[i], "k2": ks[j], "overlap": ov}
    orthogonal = worst < eps_orth

    back, back_w = 0.0, None
    fwd, fwd_w = 0.0, None
    for pos in range(len(states) - 1):
        x = apply_adjoint(T, states[pos + 1])
        defect, _ = _proportionality_defect(states[pos], x, True)
        if defect > back:
            back = defect
            back_w = {"check": "backstep", "k": ks[pos + 1], "k2": ks[pos], "defect": defect}
        y = apply(T, states[pos])
        defect, _ = _proportionality_defect(states[pos + 1], y, True)
        if defect > fwd:
            fwd = defect
            fwd_w = {"check": "forwardstep", "k": ks[pos], "k2": ks[pos + 1], "defect": defect}
    if path.cyclic is not None:
        last, first = states[-1], states[0]
        defect, _ = _proportionality_defect(first, apply(T, last), False)
        if defect > fwd:
            fwd, fwd_w = defect, {"check": "forwardstep", "k": ks[-1], "k2": ks[0], "defect": defect}
        defect, _ = _proportionality_defect(last, apply_adjoint(T, first), False)
        if defect > back:
            back, back_w = defect, {"check": "backstep", "k": ks[0], "k2": ks[-1], "defect": defect}
    backstep_ok = back < eps_orth
    forwardstep_ok = fwd < eps_orth
    if witness is None:
        if not backstep_ok:
            witness = back_w
        elif not forwardstep_ok:
            witness = fwd_w
    report = DpgReport(orthogonal, worst, backstep_ok, forwardstep_ok, back, fwd, witness)
    path.dpg = report
    return report


@dataclass
class CrossPathReport:
    ok: bool
    max_overlap: float
    paths: list[PathRecord]
    witness: dict | None = None


def verify_cross_path(T: StepOperator, seeds: Sequence[WaveState], fwd: int, bwd: int,
                      eps_orth: float = EPS_ORTH, eps_terminal: float = EPS_TERMINAL) -> CrossPathReport:
    """Generate a path per seed and check that states of different paths stay orthogonal."""
    seeds = list(seeds)
    for (i, a), (j, b) in itertools.combinations(enumerate(seeds), 2):
        ov = abs(inner_product(a.normalized(), b.normalized()))
        if ov >= eps_orth:
            raise ValueError(f"seeds {i} and {j} are not orthogonal (overlap {ov:.3g})")
    paths = [generate_path(T, s, fwd, bwd, eps_terminal, eps_orth) for s in seeds]
    tagged = [(p, k) for p, path in enumerate(paths) for k in path.indices]
    flat = [paths[p].state(k) for p, k in tagged]
    index = overlap_index(flat)
    worst, witness = 0.0, None
    for members in index.values():
        for i, j in itertools.combinations(members, 2):
            if tagged[i][0] == tagged[j][0]:
                continue
            ov = abs(inner_product(flat[i], flat[j]))
            if ov > worst:
                worst = ov
                witness = {"path": tagged[i][0], "k": tagged[i][1], "path2": tagged[j][0], "k2": tagged[j][1],
                           "overlap": ov}
    ok = worst < eps_orth
    return CrossPathReport(ok, worst, paths, None if ok else witness)


# ------------------------------------------------- power partial isometry

@dataclass
class PowerIsometryReport:
    ok: bool
    n_max: int
    max_idempotency_defect: float
    max_hermiticity_defect: float
    max_commutator: float
    witness: dict | None = None


def _in_window(psi: WaveState, window: int | None) -> None:
    if window is None:
        return
    for b in psi:
        if abs(b.head_pos) > window or any(abs(s) > window for s in b.lattice.support()):
            raise WindowOverflowError(
                f"state left the window [-{window}, {window}] at {b}; rerun with a larger window")


def _power(fn, T, psi, n, window):
    for _ in range(n):
        psi = fn(T, psi)
        _in_window(psi, window)
    return psi


def domain_projector(T: StepOperator, psi: WaveState, n: int, window: int | None = None) -> WaveState:
    """``(T^dagger)^n T^n psi``."""
    return _power(apply_adjoint, T, _power(apply, T, psi, n, window), n, window)


def range_projector(T: StepOperator, psi: WaveState, n: int, window: int | None = None) -> WaveState:
    """``T^n (T^dagger)^n psi``."""
    return _power(apply, T, _power(apply_adjoint, T, psi, n, window), n, window)


def check_power_partial_isometry(T: StepOperator, n_max: int, basis_sample: Sequence[BasisVector],
                                 window: int | None = 64, tol: float = 1e-10) -> PowerIsometryReport:
    """Test that ``(T^dagger)^n T^n`` and ``T^n (T^dagger)^n`` are commuting projectors on a sample.

    For every sampled basis vector and ``n, m <= n_max`` this checks
    idempotency, hermiticity on pairs from the sample, and
    ``[A_n, B_m] = 0``.  Raises :class:`WindowOverflowError` when an
    intermediate state leaves ``[-window, window]``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    sample = [WaveState({b: 1.0}, T.dims) for b in basis_sample]
    for s in sample:
        _in_window(s, window)
    idem = herm = comm = 0.0
    witness = None

    def note(kind, value, current, **info):
        nonlocal witness
        if value > current and value >= tol and witness is None:
            witness = {"check": kind, "defect": value, **info}
        return max(current, value)

    for n in range(1, n_max + 1):
        A = [domain_projector(T, s, n, window) for s in sample]
        B = [range_projector(T, s, n, window) for s in sample]
        for i, s in enumerate(sample):
            dA = (domain_projector(T, A[i], n, window) - A[i]).norm()
            dB = (range_projector(T, B[i], n, window) - B[i]).norm()
            idem = note("idempotency", max(dA, dB), idem, n=n, basis=basis_sample[i])
        for images, label in ((A, "A"), (B, "B")):
            index = overlap_index(images)
            probes = {b: i for i, b in enumerate(basis_sample)}
            for i, img in enumerate(images):
                for b in img:
                    j = probes.get(b)
                    if j is None or j < i:
                        continue
                    lhs = images[i][basis_sample[j]]
                    rhs = images[j][basis_sample[i]].conjugate()
                    herm = note("hermiticity", abs(lhs - rhs), herm, n=n, op=label,
                                pair=(basis_sample[i], basis_sample[j]))
            del index
        for m in range(1, n_max + 1):
            for i, s in enumerate(sample):
                AB = domain_projector(T, range_projector(T, s, m, window), n, window)
                BA = range_projector(T, A[i], m, window)
                comm = note("commutator", (AB - BA).norm(), comm, n=n, m=m, basis=basis_sample[i])
    ok = max(idem, herm, comm) < tol
    return PowerIsometryReport(ok, n_max, idem, herm, comm, None if ok else witness)


# ------------------------------------------------------ shift classification

SHIFT_TYPES = ("bilateral", "unilateral", "coisometry", "finite", "cyclic")


@dataclass(frozen=True)
class ShiftType:
    kind: str
    lower_bound: bool

    def __str__(self) -> str:
        return f"{self.kind} (truncated)" if self.lower_bound else self.kind


def classify_shift_type(path: PathRecord) -> ShiftType:
    """Shift type of a verified path.

    A path that ends forward (``T`` annihilates its last state) but runs on
    backward is the coisometry; one that ends backward only is the unilateral
    shift.  A direction that merely hit the iteration bound is reported with
    ``lower_bound=True``.
    """
    if not path.verified:
        raise UnverifiedPathError("path has not passed verify_distinct_path")
    if path.cyclic is not None:
        return ShiftType("cyclic", False)
    f, b = path.forward_terminal, path.backward_terminal
    if f and b:
        return ShiftType("finite", False)
    if f:
        return ShiftType("coisometry", True)
    if b:
        return ShiftType("unilateral", True)
    return ShiftType("bilateral", True)


def path_to_dict(path: PathRecord) -> dict:
    from .core import state_to_dict

    out = {
        "m_min": path.m_min,
        "m_max": path.m_max,
        "classification": path.classification,
        "forward_terminal": path.forward_terminal,
        "backward_terminal": path.backward_terminal,
        "cyclic": path.cyclic,
        "weights": [float(w) for w in path.weights],
        "states": {str(k): state_to_dict(path.state(k))["components"] for k in path.indices},
    }
    if path.cyclic is not None:
        out["cycle_phase"] = [path.cycle_phase.real, path.cycle_phase.imag]
    if path.dpg is not None:
        r = path.dpg
        out["dpg"] = {"ok": r.ok, "orthogonal": r.orthogonal, "max_cross_overlap": r.max_cross_overlap,
                      "backstep_ok": r.backstep_ok, "forwardstep_ok": r.forwardstep_ok,
                      "max_backstep_defect": r.max_backstep_defect,
                      "max_forwardstep_defect": r.max_forwardstep_defect, "witness": _jsonable(r.witness)}
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)) and not isinstance(obj, BasisVector):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, BasisVector):
        return {"head_level": obj.head_level, "head_pos": obj.head_pos,
                "lattice": {str(s): v for s, v in obj.lattice.items()}}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj
