import math
import numpy as np

from spindd.p1 import (P1Params, TransitionLine, bath_from_lines, build_hamiltonian,
                       p1_spectrum, transition_lines, type2_axis)
from spindd.noise import compose_baths

p = P1Params()
h = build_hamiltonian(p)
print("hermitian:", np.allclose(h, h.conj().T, atol=0))
print("trace:", np.trace(h).real, "expect", 4 * p.quadrupole)

t1 = transition_lines(p)
print("type1 lines:")
for ln in t1:
    print(f"  {ln.frequency:8.3f} MHz  w={ln.weight:.4f}  iz={ln.i_z:+d}")

t2 = transition_lines(P1Params(axis=type2_axis()))
print("type2 lines:")
for ln in t2:
    print(f"  {ln.frequency:8.3f} MHz  w={ln.weight:.4f}  iz={ln.i_z:+d}")

# paper targets
targ1 = (217.0, 339.0, 441.0)
targ2 = (249.0, 347.0, 417.0)
f1 = [ln.frequency for ln in t1]
f2 = [ln.frequency for ln in t2]
print("counts:", len(f1), len(f2))
print("type1 dev:", [round(abs(a - b), 2) for a, b in zip(f1, targ1)])
print("type2 dev:", [round(abs(a - b), 2) for a, b in zip(f2, targ2)])

# axis azimuth / sign invariance
base = [ln.frequency for ln in transition_lines(P1Params(axis=type2_axis()))]
for az in (0.7, 2.0, 4.4):
    alt = [ln.frequency for ln in transition_lines(P1Params(axis=type2_axis(az)))]
    print("azimuth", az, "max df:", max(abs(a - b) for a, b in zip(base, alt)))
c, s = 1.0 / 3.0, math.sqrt(8.0) / 3.0
neg = [ln.frequency for ln in transition_lines(P1Params(axis=(-s, 0.0, -c)))]
print("sign flip max df:", max(abs(a - b) for a, b in zip(base, neg)))

# weight conservation: total transverse weight = Tr Sx^2 = 1.5 regardless of axis
from spindd.p1 import S_OPS
for axis in ((0.0, 0.0, 1.0), type2_axis(1.1)):
    hh = build_hamiltonian(P1Params(axis=axis))
    _, v = np.linalg.eigh(hh)
    sx = v.conj().T @ S_OPS[0] @ v
    print("sum |Sx_ij|^2 (all i,j):", np.sum(np.abs(sx) ** 2).real)

spec = p1_spectrum()
print("combined:", len(spec), "total weight:", sum(ln.weight for ln in spec))
for ln in spec:
    print(f"  kind={ln.kind} {ln.frequency:8.3f} MHz w={ln.weight:.4f} iz={ln.i_z:+d}")

# bath assembly
bath = bath_from_lines(spec, rates=1.0 / 25.0, amplitudes=3.3, static_line=0.5)
print("bath lines:", len(bath.lines))
from spindd.noise import BathComposition as _BC
eff = compose_baths(_BC(lines=bath.lines[:-1]))
print("effective(6):", eff.b, eff.tau_c, "expect 3.3, 25")

one = bath_from_lines([TransitionLine(339.0, 1.0, 0, 1)], rates=0.04, amplitudes=3.3)
print("single:", one.lines[0].b, one.lines[0].tau_c)

try:
    bath_from_lines(spec, rates=[1.0, 2.0], amplitudes=3.3)
except ValueError as e:
    print("len err ok:", e)
try:
    bath_from_lines(spec, rates=-0.1, amplitudes=3.3)
except ValueError as e:
    print("neg err ok:", e)
try:
    P1Params(axis=(0.0, 0.0, 1.1))
except ValueError as e:
    print("axis err ok:", e)
