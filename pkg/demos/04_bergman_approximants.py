"""Bergman approximants psi_k converge to the limit ray.

The sup-norm error shrinks roughly like log k / k; the tilted barycenter
approaches mu_t and d/dt psi_k approaches -f(mu_t).
"""
import numpy as np

from toricgeo import OrbitPoint, PLConvexFunction, d_psi_k, mu_k, norming_constants, preset, psi_k, psi_t

P = preset("CP1xCP1")
f = PLConvexFunction(P, [((0, 0), 0), ((1, 0), "-1/2")])
ax = np.linspace(-4, 4, 17)
rows = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
z = OrbitPoint(P, P.interior, rows)
t = 1.0
lim = psi_t(P, f, t, z)

print(" k  level  sup|psi_k - psi_t|  ratio to log k/k  sup|dpsi_k + f(mu_t)|")
for k in (8, 16, 32, 64):
    Q = norming_constants(P, k * f.d)
    err = np.max(np.abs(psi_k(Q, f, t, z) - lim.psi))
    _, dt = d_psi_k(Q, f, t, z)
    print(f"{k:2d}  {Q.level:5d}  {err:18.6f}  {err * k / np.log(k):16.4f}  {np.max(np.abs(dt + f(lim.mu))):20.6f}")

# The untilted measures are products of binomials on the square.
Q = norming_constants(P, 6)
m = mu_k(Q, OrbitPoint.open(P, [0.0, 0.0]))
print("weights of the centre point at level 6 (first row):", np.round(m.weights[:7] * 4096, 6))
