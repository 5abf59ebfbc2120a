"""Time evolution: exp(-iHt) against the sum over paths.

For free motion the amplitudes are Bessel functions. On the erasure path
the truncated power series of H agrees with the matrix exponential, and
amplitudes never leak onto a different path.
"""

import numpy as np
from scipy.special import jv

from qtm import machines as M
from qtm.core import BasisVector, QuditLattice, WaveState
from qtm.dynamics import energy, evolve, hamiltonian_power_elements, pathsum_state

F = M.free()
b0 = BasisVector(0, 0, QuditLattice(2))
K, t = 1.0, 2.0
psi = evolve(F, K, WaveState({b0: 1.0}, F.dims), t)
for j in range(4):
    got = psi[BasisVector(0, j, QuditLattice(2))]
    exact = np.exp(-2j * K * t) * 1j ** j * jv(j, 2 * K * t)
    print(f"free j={j}: |amp|={abs(got):.10f}  error {abs(got - exact):.1e}")

E = M.erasure()
seed = M.erasure_bt_state(0, 5, left_wall=-2)
for n_max in (5, 10, 20, 30):
    err = (pathsum_state(E, K, seed, 1.0, n_max) - evolve(E, K, seed, 1.0)).norm()
    print(f"erasure pathsum, n_max={n_max:2d}: error {err:.1e}")

x = evolve(E, K, seed, 3.0)
print(f"norm {x.norm():.12f}, energy {energy(E, K, x):.12f} (initial {energy(E, K, seed):.12f})")

other = M.erasure_bt_state(0, 7, left_wall=-2)
elems = hamiltonian_power_elements(E, K, seed, other, 12)
print("max |<b'|H^n|b>| across paths, n<=12:", max(abs(z) for z in elems))
