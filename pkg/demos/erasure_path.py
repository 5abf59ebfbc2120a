"""Erasure machine: a distinct path, its Hamiltonian and its spectrum.

Starting from a B_T basis state the erasure machine steps the head left,
leaving |+> factors behind. On a finite tape (left wall) the path has a
start and an end, and H restricted to it is a tight-binding chain.
"""

import numpy as np

from qtm import machines as M
from qtm.dynamics import eigensystem, path_hamiltonian
from qtm.operators import check_dpg_computation_basis
from qtm.paths import generate_path, verify_distinct_path

T = M.erasure()

# the computation basis is not enough: T maps basis states to superpositions
dpg = check_dpg_computation_basis(T)
print("DPG in computation basis:", dpg.decision, "witness:", dpg.witness["kind"])

# a path on the infinite tape terminates at the wall site b
path = generate_path(T, M.erasure_bt_state(0, 5), 30, 5)
report = verify_distinct_path(T, path)
print(f"infinite tape: m in [{path.m_min}, {path.m_max}], DPG ok={report.ok}, "
      f"classification={path.classification}")

# with a left wall the path is finite at both ends
path = generate_path(T, M.erasure_bt_state(0, 4, left_wall=-2), 20, 20)
verify_distinct_path(T, path)
h = path_hamiltonian(path, K=1.0)
es = eigensystem(h)
print(f"finite path with {h.n} states, E/K =", np.round(es.energies, 6))
for name in ("standing_wave", "wall_quantization"):
    f = es.formula(name)
    print(f"  {name:20s} agrees={f.agrees}")
