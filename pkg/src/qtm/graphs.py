"""Time-unrolled computation-basis graphs of a path, their structure, and DOT/JSON export.

Node identity is ``(step, basis vector)``: the same basis vector seen at two
steps gives two nodes.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

from .core import BasisVector, WaveState
from .operators import EPS_ZERO, StepOperator, active_terms, apply

NODE_EPS = 1e-10
GRAPH_SCHEMA = "qtm.graph/1"


@dataclass(frozen=True)
class GraphNode:
    step: int
    basis: BasisVector
    amplitude: complex
    active_terms: tuple[str, ...] = ()


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    step: int
    amplitude: complex


@dataclass
class ComputationGraph:
    nodes: list[GraphNode]
    edges: list[GraphEdge]
    seed: WaveState
    layers: list[list[int]]
    step_weights: list[float]

    def __post_init__(self):
        self._out = defaultdict(list)
        self._in = defaultdict(list)
        for e in self.edges:
            self._out[e.src].append(e.dst)
            self._in[e.dst].append(e.src)

    def children(self, i: int) -> list[int]:
        return self._out.get(i, [])

    def parents(self, i: int) -> list[int]:
        return self._in.get(i, [])

    def out_degree(self, i: int) -> int:
        return len(self.children(i))

    def in_degree(self, i: int) -> int:
        return len(self.parents(i))

    def leaves(self) -> list[int]:
        return [i for i in range(len(self.nodes)) if not self.children(i)]

    def layer_sizes(self) -> list[int]:
        return [len(layer) for layer in self.layers]

    def layer_norms(self) -> list[float]:
        """Norm of the retained components at each step."""
        return [sum(abs(self.nodes[i].amplitude) ** 2 for i in layer) ** 0.5 for layer in self.layers]


def build_graph(T: StepOperator, seed: WaveState, steps: int, eps: float = NODE_EPS,
                eps_zero: float = EPS_ZERO) -> ComputationGraph:
    """Iterate ``Psi_{m+1} = T Psi_m / ||T Psi_m||`` and record the basis expansion.

    Nodes are components with modulus above ``eps``; edges join components of
    consecutive steps with a non-zero matrix element of ``T``.  Iteration
    stops early if ``T`` annihilates the current state.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    layers: list[list[int]] = []
    weights: list[float] = []

    def add_layer(m, psi):
        ids = {}
        layer = []
        for b, a in psi.sorted_items():
            if abs(a) > eps:
                ids[b] = len(nodes)
                layer.append(len(nodes))
                nodes.append(GraphNode(m, b, a, active_terms(T, b, eps_zero)))
        layers.append(layer)
        return ids

    psi = seed.normalized()
    current = add_layer(0, psi)
    for m in range(steps):
        nxt = apply(T, psi)
        w = nxt.norm()
        weights.append(w)
        if w < eps_zero:
            break
        psi = nxt.scaled(1.0 / w)
        ids = add_layer(m + 1, psi)
        for b, i in current.items():
            out = apply(T, WaveState({b: 1.0 + 0j}, T.dims, _trusted=True))
            for b2, a in sorted(out.items(), key=lambda kv: kv[0].sort_key()):
                j = ids.get(b2)
                if j is not None and abs(a) > eps_zero:
                    edges.append(GraphEdge(i, j, m, a))
        current = ids
    edges.sort(key=lambda e: (e.src, e.dst))
    return ComputationGraph(nodes, edges, seed, layers, weights)


# --------------------------------------------------------------- structure

@dataclass
class Loop:
    open_step: int
    close_step: int
    branch_node: int
    merge_node: int
    arm_lengths: tuple[int, ...]
    arm_nodes: tuple[tuple[int, ...], ...]
    arm_differences: dict[int, list[int]]
    close_amplitude: complex
    nested_in: int | None = None

    @property
    def top_level(self) -> bool:
        return self.nested_in is None


@dataclass
class StructureReport:
    branch_nodes: int
    merge_nodes: int
    leaves: int
    max_depth: int
    stage_positions: list[int]
    branch_steps: list[int]
    branch_stages: int
    is_tree: bool
    loops: list[Loop] = field(default_factory=list)
    layer_sizes: list[int] = field(default_factory=list)

    @property
    def top_level_loops(self) -> list[Loop]:
        return [lp for lp in self.loops if lp.top_level]


def _descendants_until_merge(g: ComputationGraph, u: int):
    """Walk layers below ``u`` until they collapse to one node with in-degree >= 2."""
    frontier = [u]
    seen_layers = []
    while True:
        nxt = sorted({c for i in frontier for c in g.children(i)})
        if not nxt:
            return None, seen_layers
        if len(nxt) == 1 and g.in_degree(nxt[0]) >= 2 and seen_layers:
            return nxt[0], seen_layers
        seen_layers.append(nxt)
        frontier = nxt


def _reach(g: ComputationGraph, start: int, allowed: set[int]) -> set[int]:
    out, stack = {start}, [start]
    while stack:
        for c in g.children(stack.pop()):
            if c in allowed and c not in out:
                out.add(c)
                stack.append(c)
    return out


def _arm_difference(g: ComputationGraph, arms: list[set[int]]) -> dict[int, list[int]]:
    """Sites whose qudit values differ between arms at some common step."""
    diff: dict[int, set[int]] = defaultdict(set)
    by_step = [defaultdict(list) for _ in arms]
    for a, arm in enumerate(arms):
        for i in arm:
            by_step[a][g.nodes[i].step].append(g.nodes[i].basis)
    for a in range(len(arms)):
        for b in range(a + 1, len(arms)):
            for m in set(by_step[a]) & set(by_step[b]):
                sites = set()
                for x in by_step[a][m] + by_step[b][m]:
                    sites.update(x.lattice.support())
                for s in sites:
                    va = {x.lattice[s] for x in by_step[a][m]}
                    vb = {x.lattice[s] for x in by_step[b][m]}
                    if va != vb:
                        diff[m].add(s)
    return {m: sorted(v) for m, v in sorted(diff.items())}


def find_loops(g: ComputationGraph) -> list[Loop]:
    """Branch nodes whose descendants recombine into a single node, sorted by opening step."""
    loops = []
    if not any(g.in_degree(i) >= 2 for i in range(len(g.nodes))):
        return loops
    for u in range(len(g.nodes)):
        kids = g.children(u)
        if len(kids) < 2:
            continue
        merge, layers = _descendants_until_merge(g, u)
        if merge is None:
            continue
        interior = {i for layer in layers for i in layer}
        arms = [_reach(g, c, interior) for c in kids]
        lengths = tuple(len({g.nodes[i].step for i in arm}) for arm in arms)
        loops.append(Loop(g.nodes[u].step, g.nodes[merge].step, u, merge, lengths,
                          tuple(tuple(sorted(arm)) for arm in arms), _arm_difference(g, arms),
                          g.nodes[merge].amplitude))
    loops.sort(key=lambda lp: (lp.open_step, lp.close_step, lp.branch_node))
    for i, inner in enumerate(loops):
        best = None
        for j, outer in enumerate(loops):
            if i == j:
                continue
            inside = any(inner.branch_node in arm for arm in outer.arm_nodes)
            if inside and (best is None or outer.open_step > loops[best].open_step):
                best = j
        inner.nested_in = best
    return loops


def _branch_depth(g: ComputationGraph) -> list[int]:
    """Number of branch nodes on the first-parent chain above each node, excluding itself."""
    depth = [0] * len(g.nodes)
    for layer in g.layers:
        for i in layer:
            ps = g.parents(i)
            if ps:
                p = ps[0]
                depth[i] = depth[p] + (1 if g.out_degree(p) >= 2 else 0)
    return depth


def classify_structure(g: ComputationGraph) -> StructureReport:
    n = len(g.nodes)
    branch = [i for i in range(n) if g.out_degree(i) >= 2]
    merge = [i for i in range(n) if g.in_degree(i) >= 2]
    leaves = g.leaves()
    loops = find_loops(g)
    depth = _branch_depth(g)
    stages = max((depth[i] for i in leaves), default=0)
    return StructureReport(
        branch_nodes=len(branch),
        merge_nodes=len(merge),
        leaves=len(leaves),
        max_depth=max((node.step for node in g.nodes), default=0),
        stage_positions=[g.nodes[i].basis.head_pos for i in branch],
        branch_steps=sorted({g.nodes[i].step for i in branch}),
        branch_stages=stages,
        is_tree=not merge and not loops,
        loops=loops,
        layer_sizes=g.layer_sizes(),
    )


def term_onsets(g: ComputationGraph, label: str) -> list[int | None]:
    """Per leaf, the last step at which term ``label`` becomes active after being inactive."""
    out = []
    for leaf in g.leaves():
        onset = None
        i = leaf
        while True:
            ps = g.parents(i)
            if not ps:
                break
            p = ps[0]
            if label in g.nodes[i].active_terms and label not in g.nodes[p].active_terms:
                onset = g.nodes[i].step
                break
            i = p
        out.append(onset)
    return out


# ------------------------------------------------------------------ export

def _lattice_text(b: BasisVector) -> str:
    return "{" + ",".join(f"{s}:{v}" for s, v in b.lattice.items()) + "}"


def _num(x: float) -> float:
    # canonical zero keeps output byte-stable
    return 0.0 if x == 0 else float(x)


def graph_to_dict(g: ComputationGraph) -> dict:
    leaves = set(g.leaves())
    return {
        "schema": GRAPH_SCHEMA,
        "nodes": [{
            "id": i,
            "step": node.step,
            "head_level": node.basis.head_level,
            "head_pos": node.basis.head_pos,
            "lattice": {str(s): v for s, v in node.basis.lattice.items()},
            "amp": [_num(node.amplitude.real), _num(node.amplitude.imag)],
            "active_terms": list(node.active_terms),
            "leaf": i in leaves,
        } for i, node in enumerate(g.nodes)],
        "edges": [{"src": e.src, "dst": e.dst, "step": e.step,
                   "amp": [_num(e.amplitude.real), _num(e.amplitude.imag)]} for e in g.edges],
    }


def export_graph(g: ComputationGraph, format: str = "dot") -> str:
    """Deterministic DOT or JSON text; nodes are ordered by step, then basis order."""
    if format == "json":
        return json.dumps(graph_to_dict(g), indent=2, sort_keys=True) + "\n"
    if format != "dot":
        raise ValueError(f"unsupported graph format {format!r}; use 'dot' or 'json'")
    lines = ["digraph qtm {", "  rankdir=TB;", "  node [shape=box, fontname=monospace];"]
    leaves = set(g.leaves())
    for i, node in enumerate(g.nodes):
        b = node.basis
        label = f"m={node.step} l={b.head_level} j={b.head_pos} {_lattice_text(b)}"
        extra = ", peripheries=2" if i in leaves else ""
        lines.append(f'  n{i} [label="{label}"{extra}];')
    for e in g.edges:
        w = abs(e.amplitude)
        lines.append(f'  n{e.src} -> n{e.dst} [label="{w:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
