"""Interferometers: paths that split and recombine in the computation basis.

interf1 splits only in the head level; interf2 writes on the tape in each
arm and undoes it before the arms merge. A broken variant leaves the arms
out of step and fails distinct path generation.
"""

from qtm import machines as M
from qtm.graphs import build_graph, classify_structure
from qtm.paths import generate_path, verify_distinct_path

for z in range(3):
    g = build_graph(M.interf1(), M.interf1_seed(z), 8 + 2 * z)
    (loop,) = classify_structure(g).loops
    print(f"interf1 z={z}: arms {loop.arm_lengths}, |closing amplitude| {abs(loop.close_amplitude):.12f}")

g = build_graph(M.interf2(), M.interf2_seed(), 9)
(top,) = classify_structure(g).top_level_loops
print(f"interf2: steps {top.open_step}->{top.close_step}, arms {top.arm_lengths}, "
      f"tape differences {top.arm_differences}")

loops = classify_structure(build_graph(M.interf2(), M.interf2_chain_seed(3), 20)).top_level_loops
print("interf2 chain of 3:", [(lp.open_step, lp.close_step) for lp in loops])

T = M.builtin("interf2_broken")
rep = verify_distinct_path(T, generate_path(T, M.interf2_single_seed(1), 12, 0))
print("broken interferometer: DPG ok =", rep.ok, "witness =", rep.witness)
