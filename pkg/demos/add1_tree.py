"""Add-1 machine: the binary tree of computation-basis states.

Between two markers n sites apart the machine applies a Hadamard-like v at
each site, so the graph fans out into 2^n leaves. With no second marker the
tree never stops growing.
"""

from qtm import machines as M
from qtm.graphs import build_graph, classify_structure, export_graph

T = M.add1()
for n in (1, 2, 3):
    g = build_graph(T, M.add1_initial_state([0, n + 1]), 3 * n + 4)
    rep = classify_structure(g)
    print(f"n={n}: tree={rep.is_tree}, leaves={rep.leaves}, branch steps={rep.branch_steps}")

# two marker regions concatenate: 4 x 4 leaves
rep = classify_structure(build_graph(T, M.add1_initial_state([0, 3, 5, 8]), 26))
print("markers 0,3,5,8:", rep.leaves, "leaves")

# a single marker: layer sizes double every step
print("single marker layer sizes:", build_graph(T, M.add1_initial_state([0]), 10).layer_sizes())

with open("add1_n2.dot", "w") as fh:
    fh.write(export_graph(build_graph(T, M.add1_initial_state([0, 3]), 10), "dot"))
print("wrote add1_n2.dot (render with: dot -Tpng add1_n2.dot -o add1_n2.png)")
