"""Computation-basis states of a one-tape quantum Turing machine.

A basis vector is ``|l, j, s>``: head internal level ``l``, head position
``j`` and a qudit lattice configuration ``s`` in which only finitely many
sites differ from level 0.  Superpositions are kept sparse as a mapping from
basis vectors to complex amplitudes.

Site indices are plain Python ints; anything that leaves the signed 64-bit
range is rejected when serialising.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping, NamedTuple

PRUNE_EPS = 1e-12

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


class IncompatibleDimensionsError(ValueError):
    """States or machines built for different head/qudit dimensions."""


_new = object.__new__


class QuditLattice:
    """Immutable finite-support lattice configuration.

    Only non-zero levels are stored, sorted by site, so two lattices that
    describe the same configuration compare and hash equal.
    """

    __slots__ = ("d", "_items", "_map", "_hash")

    def __init__(self, d: int, entries: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        if d < 2:
            raise ValueError(f"qudit dimension must be >= 2, got {d}")
        pairs = entries.items() if isinstance(entries, Mapping) else entries
        clean = {}
        for site, level in pairs:
            site, level = int(site), int(level)
            if not 0 <= level < d:
                raise ValueError(f"level {level} at site {site} outside 0..{d - 1}")
            if level:
                clean[site] = level
            else:
                clean.pop(site, None)
        self._init(d, tuple(sorted(clean.items())), clean)

    def _init(self, d, items, mapping):
        self.d = d
        self._items = items
        self._map = mapping
        self._hash = hash((d, items))

    @classmethod
    def _canonical(cls, d: int, mapping: dict) -> "QuditLattice":
        # caller guarantees: no zero levels, all levels < d
        obj = cls.__new__(cls)
        obj._init(d, tuple(sorted(mapping.items())), mapping)
        return obj

    @classmethod
    def zeros(cls, d: int) -> "QuditLattice":
        return cls(d)

    def __getitem__(self, site: int) -> int:
        return self._map.get(site, 0)

    get = __getitem__

    def set(self, site: int, level: int) -> "QuditLattice":
        """Return a copy with ``site`` set to ``level``."""
        m = self._map
        if m.get(site, 0) == level:
            return self
        mapping = m.copy()
        if level:
            mapping[site] = level
        else:
            del mapping[site]
        # inlined _canonical: this sits in the innermost loop of T application
        obj = _new(QuditLattice)
        obj.d = d = self.d
        obj._map = mapping
        obj._items = items = tuple(sorted(mapping.items()))
        obj._hash = hash((d, items))
        return obj

    def shifted(self, k: int) -> "QuditLattice":
        return QuditLattice._canonical(self.d, {s + k: v for s, v in self._items})

    def items(self) -> tuple[tuple[int, int], ...]:
        return self._items

    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self._items)

    def as_dict(self) -> dict[int, int]:
        return dict(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuditLattice):
            return NotImplemented
        return self.d == other.d and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{s}: {v}" for s, v in self._items)
        return f"QuditLattice(d={self.d}, {{{body}}})"


class BasisVector(NamedTuple):
    """One computation-basis element ``|head_level, head_pos, lattice>``."""

    head_level: int
    head_pos: int
    lattice: QuditLattice

    def shifted(self, k: int) -> "BasisVector":
        return BasisVector(self.head_level, self.head_pos + k, self.lattice.shifted(k))

    def sort_key(self) -> tuple:
        return (self.head_level, self.head_pos, self.lattice.items())

    @property
    def scanned(self) -> int:
        """Level of the qudit under the head."""
        return self.lattice[self.head_pos]


def basis(head_level: int, head_pos: int, lattice: Mapping[int, int] | QuditLattice, d: int | None = None) -> BasisVector:
    """Convenience constructor accepting a plain ``{site: level}`` mapping."""
    if not isinstance(lattice, QuditLattice):
        if d is None:
            raise ValueError("qudit dimension d is required for a plain mapping")
        lattice = QuditLattice(d, lattice)
    return BasisVector(int(head_level), int(head_pos), lattice)


class WaveState:
    """Sparse superposition of basis vectors.

    Parameters
    ----------
    components : mapping of BasisVector to complex amplitude.
    dims : ``(L, d)``, head dimension and qudit dimension.
    prune_eps : amplitudes with modulus ``<= prune_eps`` are dropped.
    """

    __slots__ = ("_amps", "dims", "prune_eps")
    # numpy scalars defer to __rmul__ instead of iterating the state
    __array_ufunc__ = None

    def __init__(self, components: Mapping[BasisVector, complex] | Iterable[tuple[BasisVector, complex]] = (),
                 dims: tuple[int, int] = (1, 2), prune_eps: float = PRUNE_EPS, *, _trusted: bool = False):
        if prune_eps < 0:
            raise ValueError("prune_eps must be >= 0")
        L, d = int(dims[0]), int(dims[1])
        self.dims = (L, d)
        self.prune_eps = prune_eps
        if _trusted and type(components) is dict:
            # internal callers hand over a fresh dict of complex values; prune in place
            dead = [b for b, a in components.items() if abs(a) <= prune_eps]
            for b in dead:
                del components[b]
            self._amps = components
            return
        pairs = components.items() if isinstance(components, Mapping) else components
        amps = {}
        for b, a in pairs:
            a = complex(a)
            if abs(a) <= prune_eps:
                continue
            if not _trusted:
                if not 0 <= b.head_level < L:
                    raise IncompatibleDimensionsError(f"head level {b.head_level} outside 0..{L - 1}")
                if b.lattice.d != d:
                    raise IncompatibleDimensionsError(f"lattice qudit dimension {b.lattice.d} != {d}")
            amps[b] = a
        self._amps = amps

    @classmethod
    def basis_state(cls, b: BasisVector, L: int, amp: complex = 1.0, prune_eps: float = PRUNE_EPS) -> "WaveState":
        return cls({b: amp}, (L, b.lattice.d), prune_eps)

    @classmethod
    def zero(cls, dims: tuple[int, int], prune_eps: float = PRUNE_EPS) -> "WaveState":
        return cls({}, dims, prune_eps)

    # mapping-like access
    def __getitem__(self, b: BasisVector) -> complex:
        return self._amps.get(b, 0j)

    def __contains__(self, b: BasisVector) -> bool:
        return b in self._amps

    def __iter__(self) -> Iterator[BasisVector]:
        return iter(self._amps)

    def __len__(self) -> int:
        return len(self._amps)

    def items(self):
        return self._amps.items()

    def support(self) -> list[BasisVector]:
        return sorted(self._amps, key=BasisVector.sort_key)

    def sorted_items(self) -> list[tuple[BasisVector, complex]]:
        return sorted(self._amps.items(), key=lambda kv: kv[0].sort_key())

    @property
    def L(self) -> int:
        return self.dims[0]

    @property
    def d(self) -> int:
        return self.dims[1]

    def is_zero(self) -> bool:
        return not self._amps

    def norm(self) -> float:
        return math.sqrt(sum(a.real * a.real + a.imag * a.imag for a in self._amps.values()))

    def normalized(self) -> "WaveState":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalise the zero state")
        return self.scaled(1.0 / n)

    def scaled(self, c: complex) -> "WaveState":
        c = complex(c)
        return WaveState({b: c * a for b, a in self._amps.items()}, self.dims, self.prune_eps, _trusted=True)

    def shifted(self, k: int) -> "WaveState":
        """Translate head and lattice by ``k`` sites."""
        return WaveState({b.shifted(k): a for b, a in self._amps.items()}, self.dims, self.prune_eps, _trusted=True)

    def restricted(self, predicate) -> "WaveState":
        return WaveState({b: a for b, a in self._amps.items() if predicate(b)}, self.dims, self.prune_eps,
                         _trusted=True)

    def __add__(self, other: "WaveState") -> "WaveState":
        return superpose([(1.0, self), (1.0, other)])

    def __sub__(self, other: "WaveState") -> "WaveState":
        return superpose([(1.0, self), (-1.0, other)])

    def __mul__(self, c: complex) -> "WaveState":
        return self.scaled(c)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "WaveState":
        return self.scaled(1.0 / c)

    def __neg__(self) -> "WaveState":
        return self.scaled(-1.0)

    def __repr__(self) -> str:
        return f"WaveState(dims={self.dims}, n_components={len(self)}, norm={self.norm():.6g})"


def check_compatible(a: WaveState, b: WaveState) -> None:
    if a.dims != b.dims:
        raise IncompatibleDimensionsError(f"states built for different machines: {a.dims} vs {b.dims}")


def inner_product(a: WaveState, b: WaveState) -> complex:
    """``<a|b>``, antilinear in the first argument."""
    check_compatible(a, b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    if small is a:
        for k, x in a.items():
            y = b._amps.get(k)
            if y is not None:
                total += x.conjugate() * y
    else:
        for k, y in b.items():
            x = a._amps.get(k)
            if x is not None:
                total += x.conjugate() * y
    return total


def norm(a: WaveState) -> float:
    return math.sqrt(max(inner_product(a, a).real, 0.0))


def superpose(parts: Iterable[tuple[complex, WaveState]], prune_eps: float | None = None) -> WaveState:
    """Linear combination ``sum_i c_i psi_i``; result pruned at ``prune_eps``.

    ``prune_eps`` defaults to the largest threshold among the parts.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("superpose needs at least one part")
    dims = parts[0][1].dims
    eps = prune_eps
    acc: dict[BasisVector, complex] = {}
    for c, psi in parts:
        if psi.dims != dims:
            raise IncompatibleDimensionsError(f"states built for different machines: {dims} vs {psi.dims}")
        if prune_eps is None:
            eps = psi.prune_eps if eps is None else max(eps, psi.prune_eps)
        c = complex(c)
        for b, a in psi.items():
            acc[b] = acc.get(b, 0j) + c * a
    return WaveState(acc, dims, eps, _trusted=True)


def overlap_index(states: Iterable[WaveState]) -> dict[BasisVector, list[int]]:
    """Map each basis vector to the indices of the states whose support contains it."""
    index: dict[BasisVector, list[int]] = {}
    for i, psi in enumerate(states):
        for b in psi:
            index.setdefault(b, []).append(i)
    return index


# ---------------------------------------------------------------- JSON

def _check_int64(x: int) -> int:
    if not _INT64_MIN <= x <= _INT64_MAX:
        raise OverflowError(f"site index {x} does not fit a signed 64-bit integer")
    return x


def state_to_dict(psi: WaveState) -> dict:
    comps = []
    for b, a in psi.sorted_items():
        comps.append({
            "amp": [a.real, a.imag],
            "head_level": b.head_level,
            "head_pos": _check_int64(b.head_pos),
            "lattice": {str(_check_int64(s)): v for s, v in b.lattice.items()},
        })
    return {"head_dim": psi.L, "qudit_dim": psi.d, "components": comps}


def state_from_dict(data: Mapping, dims: tuple[int, int] | None = None, prune_eps: float = PRUNE_EPS) -> WaveState:
    """Build a state from the JSON layout; level-0 lattice entries are dropped.

    ``dims`` overrides the optional ``head_dim``/``qudit_dim`` keys; when both
    are absent the smallest dimensions that fit the data are used.
    """
    comps = data["components"]
    if dims is None:
        L = data.get("head_dim")
        d = data.get("qudit_dim")
        if L is None:
            L = max((int(c["head_level"]) for c in comps), default=0) + 1
        if d is None:
            d = max((int(v) for c in comps for v in c.get("lattice", {}).values()), default=1) + 1
            d = max(d, 2)
        dims = (int(L), int(d))
    L, d = dims
    acc: dict[BasisVector, complex] = {}
    for c in comps:
        re, im = c["amp"]
        lattice = QuditLattice(d, {int(k): int(v) for k, v in c.get("lattice", {}).items()})
        b = BasisVector(int(c["head_level"]), int(c["head_pos"]), lattice)
        acc[b] = acc.get(b, 0j) + complex(re, im)
    return WaveState(acc, (L, d), prune_eps)
