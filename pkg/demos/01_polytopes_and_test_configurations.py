"""Delzant polytopes, lattice points and piecewise-linear test configurations.

Run with ``python3 demos/01_polytopes_and_test_configurations.py``.
"""
import numpy as np

from toricgeo import NotDelzant, PLConvexFunction, futaki, preset, subdifferential, validate, weights

# A trapezoid given in arbitrary coordinates is translated so that the origin
# is a vertex and the polytope sits in the positive quadrant.
P = validate([((1, 0), 2), ((0, 1), -1), ((0, -1), 0), ((-1, -1), -5)], name="shifted Hirzebruch")
print("vertices after normalization:", [tuple(map(str, v)) for v in P.vertices])
print("normalization shift:", [str(c) for c in P.normalization.shift])
print("volume", P.volume, " boundary volume", P.boundary_volume)
print("lattice points of 3P:", len(P.lattice_points(3)))

# The smoothness test is exact; a singular corner is reported with its vertex.
try:
    validate([((1, 0), 0), ((0, 1), 0), ((-1, -2), -2)])
except NotDelzant as err:
    print("rejected:", err)

# f = max(0, x1 - 1/2, x2 - 1/2) on the unit simplex
S = preset("CP2")
f = PLConvexFunction(S, [((0, 0), 0), ((1, 0), "-1/2"), ((0, 1), "-1/2")])
print(f)
print("denominator d =", f.d, " cap R =", f.R)
print("chamber volumes:", [str(c.volume) for c in f.chambers])
print("corner sets:", f.corner_sets)
print("subdifferential at (1/2, 1/4):", subdifferential(f, [0.5, 0.25]).tolist())

table = weights(f, 2)
print(f"weights at level {table.level}: eta in [{min(table.eta)}, {max(table.eta)}], sum of lambda = {sum(table.lam)}")
print("Futaki invariant:", futaki(f))

# For the interval example the invariant is -1/4.
I = preset("CP1")
g = PLConvexFunction(I, [((-1,), "1/2"), ((1,), "-1/2")])
print("interval |x - 1/2|: futaki", futaki(g), " eta", [str(e) for e in weights(g, 1).eta])
assert np.isclose(float(futaki(g)), -0.25)
