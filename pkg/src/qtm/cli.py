"""``qtm`` command line: validate machines, generate and check paths, spectra, evolution and graphs.

Exit status is 0 on success, 1 when a check fails (a JSON witness is
printed), 2 on usage, parse or file errors.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import warnings
from pathlib import Path

from . import dynamics, graphs, machines, operators, paths
from .core import BasisVector, IncompatibleDimensionsError, QuditLattice, WaveState, state_to_dict

CLI_SCHEMA = "qtm.cli/1"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- parsing

def parse_machine(spec: str):
    if spec.startswith("builtin:"):
        try:
            return machines.builtin(spec)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if not Path(spec).exists():
        raise UsageError(f"machine file {spec!r} not found (use builtin:NAME for builtins)")
    return machines.load_machine(spec)


def _kv(parts: list[str], allowed: set[str]) -> dict[str, str]:
    out = {}
    for part in parts:
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        if k not in allowed:
            raise UsageError(f"unknown parameter {k!r}; expected one of {sorted(allowed)}")
        out[k] = v
    return out


def _int(value: str, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{what} must be an integer, got {value!r}") from None


def parse_state(spec: str, T) -> WaveState:
    """Build a seed from a mini-spec or load it from a JSON file.

    Mini-specs: ``markers:0,4[:head=H]``, ``interf1:z=2``, ``interf2seed``,
    ``interf2chain:n=3``, ``interf2single:j=1``, ``erasure:n=0,b=5[,a=-3]``,
    ``basis:l=0,j=0[,sites=3:1;5:1]``.
    """
    kind, _, rest = spec.partition(":")
    if kind == "markers":
        fields = rest.split(":")
        sites = [_int(x, "marker site") for x in fields[0].split(",") if x]
        kw = _kv(fields[1:], {"head"})
        head = _int(kw["head"], "head") if "head" in kw else None
        psi = machines.add1_initial_state(sites, head)
    elif kind == "interf1":
        kw = _kv([p for p in rest.split(",") if p], {"z"})
        psi = machines.interf1_seed(_int(kw.get("z", "0"), "z"))
    elif kind == "interf2seed":
        psi = machines.interf2_seed()
    elif kind == "interf2chain":
        kw = _kv([p for p in rest.split(",") if p], {"n", "gap"})
        psi = machines.interf2_chain_seed(_int(kw.get("n", "1"), "n"), _int(kw.get("gap", "1"), "gap"))
    elif kind == "interf2single":
        kw = _kv([p for p in rest.split(",") if p], {"j"})
        psi = machines.interf2_single_seed(_int(kw.get("j", "1"), "j"))
    elif kind == "erasure":
        kw = _kv([p for p in rest.split(",") if p], {"n", "b", "a"})
        if "b" not in kw:
            raise UsageError("erasure state needs b=<wall site>")
        a = _int(kw["a"], "a") if "a" in kw else None
        psi = machines.erasure_bt_state(_int(kw.get("n", "0"), "n"), _int(kw["b"], "b"), left_wall=a)
    elif kind == "basis":
        kw = _kv([p for p in rest.split(",") if p], {"l", "j", "sites"})
        lattice = {}
        for item in filter(None, kw.get("sites", "").split(";")):
            s, _, v = item.partition(":")
            lattice[_int(s, "site")] = _int(v, "level")
        b = BasisVector(_int(kw.get("l", "0"), "l"), _int(kw.get("j", "0"), "j"), QuditLattice(T.d, lattice))
        psi = WaveState({b: 1.0}, T.dims)
    elif Path(spec).exists():
        psi = machines.load_state(spec, T.dims)
    else:
        raise UsageError(f"cannot parse state {spec!r}: not a known builder and not a file")
    if psi.dims != T.dims:
        raise UsageError(f"state dimensions {psi.dims} do not match machine {T.name!r} {T.dims}")
    return psi


# ----------------------------------------------------------------- output

def _jsonable(obj):
    if isinstance(obj, BasisVector):
        return {"head_level": obj.head_level, "head_pos": obj.head_pos,
                "lattice": {str(s): v for s, v in obj.lattice.items()}}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def _emit(args, command: str, ok: bool, payload: dict, text: str) -> int:
    out = sys.stdout
    if args.json:
        doc = {"schema": CLI_SCHEMA, "command": command, "ok": ok, **payload}
        body = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    else:
        body = text.rstrip("\n") + "\n"
        if not ok and payload.get("witness") is not None:
            body += "witness: " + json.dumps(_jsonable(payload["witness"]), sort_keys=True) + "\n"
    if getattr(args, "out", None) and command != "graph":
        Path(args.out).write_text(body)
    else:
        out.write(body)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    T = parse_machine(args.machine)
    homog = operators.check_homogeneity_locality(T, samples=args.samples, seed=args.seed)
    dpg = operators.check_dpg_computation_basis(T, args.eps_zero)
    payload = {"machine": T.name, "dims": list(T.dims), "terms": len(T.terms),
               "homogeneity_locality": {"ok": homog.ok, "samples": homog.samples, "witness": homog.witness},
               "dpg_computation_basis": {"decision": dpg.decision, "witness": dpg.witness},
               "witness": homog.witness}
    text = (f"machine {T.name}: L={T.L} d={T.d} terms={len(T.terms)}\n"
            f"homogeneity/locality: {'ok' if homog.ok else 'FAIL'} ({homog.samples} samples)\n"
            f"DPG in computation basis: {str(dpg.decision).lower()}")
    if dpg.witness:
        text += f"\n  witness: {json.dumps(_jsonable(dpg.witness), sort_keys=True)}"
    return _emit(args, "validate", homog.ok, payload, text)


def _path(args, T, psi):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = paths.generate_path(T, psi, args.steps, args.back_steps, args.eps_terminal, args.eps_orth)
    report = paths.verify_distinct_path(T, path, args.eps_orth)
    return path, report, [str(w.message) for w in caught]


def cmd_path(args) -> int:
    T = parse_machine(args.machine)
    psi = parse_state(args.state, T)
    path, report, notes = _path(args, T, psi)
    shift = str(paths.classify_shift_type(path)) if report.ok else None
    payload = {"machine": T.name, "path": paths.path_to_dict(path), "shift_type": shift,
               "warnings": notes, "witness": report.witness}
    lines = [f"path k = {path.m_min}..{path.m_max} ({len(path)} states), classification {path.classification}",
             f"forward_terminal={path.forward_terminal} backward_terminal={path.backward_terminal} "
             f"cyclic={path.cyclic}",
             f"weights: min {min(path.weights):.6g} max {max(path.weights):.6g}",
             f"orthogonal={report.orthogonal} (max overlap {report.max_cross_overlap:.3g}) "
             f"backstep_ok={report.backstep_ok} forwardstep_ok={report.forwardstep_ok}",
             f"DPG along path: {'pass' if report.ok else 'FAIL'}"]
    if shift:
        lines.append(f"shift type: {shift}")
    lines += [f"warning: {w}" for w in notes]
    return _emit(args, "path", report.ok, payload, "\n".join(lines))


def cmd_isometry(args) -> int:
    T = parse_machine(args.machine)
    rng = random.Random(args.seed)
    sample = sorted({operators.random_basis_vector(T, rng) for _ in range(args.sample)}, key=BasisVector.sort_key)
    try:
        rep = paths.check_power_partial_isometry(T, args.n_max, sample, window=args.window)
    except paths.WindowOverflowError as exc:
        raise UsageError(str(exc)) from None
    payload = {"machine": T.name, "n_max": rep.n_max, "sample": len(sample),
               "max_idempotency_defect": rep.max_idempotency_defect,
               "max_hermiticity_defect": rep.max_hermiticity_defect,
               "max_commutator": rep.max_commutator, "witness": rep.witness}
    text = (f"power partial isometry up to n={rep.n_max} on {len(sample)} basis vectors: "
            f"{'pass' if rep.ok else 'FAIL'}\n"
            f"idempotency {rep.max_idempotency_defect:.3g}, hermiticity {rep.max_hermiticity_defect:.3g}, "
            f"commutator {rep.max_commutator:.3g}")
    return _emit(args, "isometry", rep.ok, payload, text)


def cmd_spectrum(args) -> int:
    T = parse_machine(args.machine)
    psi = parse_state(args.state, T)
    path, report, notes = _path(args, T, psi)
    if not report.ok:
        return _emit(args, "spectrum", False, {"witness": report.witness, "warnings": notes},
                     "path failed DPG verification; no spectrum")
    h = dynamics.path_hamiltonian(path, args.K)
    es = dynamics.eigensystem(h)
    formulas = [{"name": f.name, "rule": f.note, "agrees": f.agrees, "count_matches": f.count_matches,
                 "max_deviation": f.max_deviation, "energies": f.energies} for f in es.formulas]
    payload = {"machine": T.name, "n": h.n, "K": h.K, "boundary": h.boundary,
               "truncated": list(h.truncated), "eigenvalues": [float(e) for e in es.energies],
               "formulas": formulas, "warnings": notes, "witness": None}
    lines = [f"path Hamiltonian: {h.n} states, {h.boundary} boundary, K={h.K:g}"]
    if any(h.truncated):
        lines.append("note: path truncated at the iteration bound; walls there are artificial")
    lines.append("eigenvalues: " + " ".join(f"{e:.12g}" for e in es.energies))
    for f in formulas:
        verdict = "agrees" if f["agrees"] else "DISAGREES"
        lines.append(f"{f['name']} ({f['rule']}): {verdict} with numeric spectrum "
                     f"({len(f['energies'])} levels vs {h.n})")
    return _emit(args, "spectrum", True, payload, "\n".join(lines))


def cmd_evolve(args) -> int:
    T = parse_machine(args.machine)
    psi = parse_state(args.state, T).normalized()
    notes = []
    if args.method == "expm":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = dynamics.evolve(T, args.K, psi, args.time, depth=args.depth, window=args.window)
        notes = [str(w.message) for w in caught]
    else:
        out = dynamics.pathsum_state(T, args.K, psi, args.time, args.n_max)
    amps = state_to_dict(out)["components"]
    payload = {"machine": T.name, "method": args.method, "K": args.K, "time": args.time,
               "norm": out.norm(), "energy": dynamics.energy(T, args.K, out), "amplitudes": amps,
               "warnings": notes, "witness": None}
    lines = [f"evolved by {args.method} to t={args.time:g} (K={args.K:g}): {len(out)} components, "
             f"norm {out.norm():.12g}"]
    for b, a in out.sorted_items():
        lat = ",".join(f"{s}:{v}" for s, v in b.lattice.items())
        lines.append(f"  l={b.head_level} j={b.head_pos} {{{lat}}}  {a.real:+.10f} {a.imag:+.10f}i")
    lines += [f"warning: {w}" for w in notes]
    return _emit(args, "evolve", True, payload, "\n".join(lines))


def cmd_graph(args) -> int:
    T = parse_machine(args.machine)
    psi = parse_state(args.state, T)
    g = graphs.build_graph(T, psi, args.steps)
    rep = graphs.classify_structure(g)
    exported = graphs.export_graph(g, args.format)
    if args.out:
        Path(args.out).write_text(exported)
    loops = [{"open_step": lp.open_step, "close_step": lp.close_step, "arm_lengths": list(lp.arm_lengths),
              "arm_differences": lp.arm_differences, "close_amplitude": lp.close_amplitude,
              "top_level": lp.top_level} for lp in rep.loops]
    summary = {"nodes": len(g.nodes), "edges": len(g.edges), "branch_nodes": rep.branch_nodes,
               "merge_nodes": rep.merge_nodes, "leaves": rep.leaves, "max_depth": rep.max_depth,
               "branch_steps": rep.branch_steps, "branch_stages": rep.branch_stages, "is_tree": rep.is_tree,
               "loops": loops, "layer_sizes": rep.layer_sizes}
    if args.json:
        payload = {"machine": T.name, "structure": summary, "witness": None}
        if not args.out:
            payload["graph"] = graphs.graph_to_dict(g) if args.format == "json" else exported
        return _emit(args, "graph", True, payload, "")
    if not args.out:
        sys.stdout.write(exported)
    sys.stderr.write(f"graph: {len(g.nodes)} nodes, {rep.leaves} leaves, {rep.branch_nodes} branch nodes, "
                     f"{rep.merge_nodes} merge nodes, {len(rep.top_level_loops)} top-level loops\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtm", description="Quantum Turing machine step-operator toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, state=True):
        sp.add_argument("--machine", required=True, help="builtin:NAME or a machine JSON file")
        if state:
            sp.add_argument("--state", required=True, help="state mini-spec or a state JSON file")
        sp.add_argument("--json", action="store_true", help="versioned JSON output")
        sp.add_argument("--out", help="write output to this file")
        sp.add_argument("--eps-orth", type=float, default=paths.EPS_ORTH)
        sp.add_argument("--eps-terminal", type=float, default=paths.EPS_TERMINAL)

    sp = sub.add_parser("validate", help="structural checks and computation-basis DPG decision")
    common(sp, state=False)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--eps-zero", type=float, default=operators.EPS_ZERO)
    sp.set_defaults(func=cmd_validate)

    for name, func, hlp in (("path", cmd_path, "generate a path and verify distinct path generation"),
                            ("spectrum", cmd_spectrum, "spectrum of H restricted to a verified path")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--steps", type=int, default=20)
        sp.add_argument("--back-steps", type=int, default=0)
        if name == "spectrum":
            sp.add_argument("--K", type=float, default=1.0)
        sp.set_defaults(func=func)

    sp = sub.add_parser("isometry", help="check powers of T are partial isometries on sampled basis vectors")
    common(sp, state=False)
    sp.add_argument("--n-max", type=int, default=3)
    sp.add_argument("--sample", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--window", type=int, default=64)
    sp.set_defaults(func=cmd_isometry)

    sp = sub.add_parser("evolve", help="amplitudes of exp(-iHt) applied to a state")
    common(sp)
    sp.add_argument("--K", type=float, default=1.0)
    sp.add_argument("--time", type=float, required=True)
    sp.add_argument("--method", choices=("expm", "pathsum"), default="expm")
    sp.add_argument("--n-max", type=int, default=30, help="series order for --method pathsum")
    sp.add_argument("--depth", type=int, default=None, help="closure depth (default 2*ceil(K t) + 20)")
    sp.add_argument("--window", type=int, default=None, help="restrict sites to [-W, W]")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("graph", help="computation-basis graph of a path, with structure summary")
    common(sp)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--format", choices=("dot", "json"), default="dot")
    sp.set_defaults(func=cmd_graph)
    return p


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    for flag in ("steps", "back_steps", "n_max", "sample", "samples"):
        if getattr(args, flag, 0) is not None and getattr(args, flag, 0) < 0:
            sys.stderr.write(f"qtm: error: --{flag.replace('_', '-')} must be >= 0\n")
            return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError, IncompatibleDimensionsError) as exc:
        msg = exc.args[0] if exc.args else exc
        sys.stderr.write(f"qtm {args.command}: error: {msg}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
