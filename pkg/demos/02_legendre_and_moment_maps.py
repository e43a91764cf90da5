"""Kähler potentials, symplectic potentials and the moment map.

The canonical potential is a log-sum-exp over lattice points; its Legendre
transform is the symplectic potential, whose gradient inverts the moment map.
"""
import numpy as np

from toricgeo import OrbitPoint, conjugate_u0, moment0, phi, preset, u0
from toricgeo.potentials import lattice_table

P = preset("Hirzebruch1")
rho = np.array([0.7, -1.2])
value, grad, hess = phi(P, None, rho)
print("phi(rho) =", value)
print("moment map =", grad, " (a point of P)")
print("Hessian eigenvalues:", np.linalg.eigvalsh(hess))

x = moment0(P, OrbitPoint.open(P, rho))
val, rstar = u0(P, None, x)
print("u0(mu0(rho)) =", val, " grad u0 recovers rho:", rstar)
print("Fenchel-Young gap:", val + value - x @ rho)
print("conjugate of u0 by an x-space solve:", conjugate_u0(P, None, rho)[0], "vs", value)

# Near the boundary u0 behaves like sum(slack * log slack).
center = lattice_table(P, P.interior).mean(axis=0)
for eps in (1e-2, 1e-4, 1e-6):
    y = np.array([eps, center[1]])
    sl = P.slacks(y)
    print(f"slack {eps:.0e}: u0 - sum l log l = {u0(P, None, y)[0] - np.sum(sl * np.log(sl)):+.6f}")

# On a facet the potential is the one of the facet's own lattice points.
F = P.facet_faces()[1]
z = OrbitPoint(P, F, np.array([0.4]))
print(f"moment map of a point on {F.label}:", moment0(P, z))
