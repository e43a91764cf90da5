"""Rate functions, log moment generating functions and Laplace asymptotics."""
import numpy as np

from toricgeo import (
    OrbitPoint,
    PLConvexFunction,
    conjugate_check,
    ldp_bounds,
    log_mgf,
    moment0,
    norming_constants,
    preset,
    rate,
    varadhan_check,
)

P = preset("CP1xCP1")
z = OrbitPoint.open(P, [0.5, -1.0])
print("mu_0(z) =", moment0(P, z), " I^z there:", rate(z, moment0(P, z)))
print("I^z at (0.9, 0.5):", rate(z, np.array([0.9, 0.5])))
res, tau = conjugate_check(z, np.array([0.9, 0.5]))
print("Legendre residual", res, "at tau*", tau)

tables = [norming_constants(P, N) for N in (16, 32, 64, 128)]
rep = ldp_bounds(z, [([0.8, 0.0], [1.0, 1.0])], tables)
for (N, lm), (_, gap) in zip(rep.series("log_mass"), rep.series("gap")):
    print(f"N = {N:3d}: (1/N) log mu(K) = {lm:+.5f}, gap to -inf I = {gap:+.5f}")

# A facet point only charges the facet; off it the rate is infinite.
F = P.face([1])
w = OrbitPoint(P, F, np.array([0.2]))
print("I on the facet:", rate(w, np.array([0.5, 0.0])), " off it:", rate(w, np.array([0.5, 0.2])))

# Hirzebruch-1: finite-level log-MGF error against the limit
H = preset("Hirzebruch1")
zh = OrbitPoint.open(H, [0.0, 0.0])
ax = np.linspace(-2, 2, 9)
taus = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
for N in (8, 16, 32):
    err = np.max(np.abs(log_mgf(zh, taus, norming_constants(H, N)) - log_mgf(zh, taus)))
    print(f"N = {N:2d}: sup |Lambda_N - Lambda| = {err:.2e}  (x N^2 = {err * N * N:.3f})")

f = PLConvexFunction(P, [((0, 0), 0), ((1, 0), "-1/2")])
v = varadhan_check(z, f, 1.0, tables[:3])
print("Laplace-principle errors:", np.round(v.values("delta"), 5))
