"""The limit ray on CP1 for f = |x - 1/2| and its loss of smoothness.

psi_t + phi equals -t/2 + log(1 + e^(rho+t)) for rho < -t, rho/2 + log 2 in
between and t/2 + log(1 + e^(rho-t)) for rho > t.  The middle band is where
the moment map is stuck at the kink of f.
"""
import numpy as np

from toricgeo import OrbitPoint, PLConvexFunction, preset, psi_t, regularity_probe

P = preset("CP1")
f = PLConvexFunction(P, [((-1,), "1/2"), ((1,), "-1/2")])
rho = np.linspace(-6, 6, 241)
t = 1.0
sol = psi_t(P, f, t, OrbitPoint(P, P.interior, rho[:, None]))
total = sol.psi + np.logaddexp(0, rho)
closed = np.where(rho < -t, -t / 2 + np.logaddexp(0, rho + t), np.where(rho > t, t / 2 + np.logaddexp(0, rho - t), rho / 2 + np.log(2)))
print("max deviation from the closed form:", np.max(np.abs(total - closed)))

for r in (-3.0, -0.5, 0.0, 0.5, 3.0):
    i = np.argmin(np.abs(rho - r))
    reg = sol.region[i]
    xi = "" if reg.xi is None else f" weights {np.round(reg.xi, 3).tolist()}"
    print(f"rho = {r:+.1f}: mu_t = {sol.mu[i, 0]:.6f}  {reg.label}{xi}")

rep = regularity_probe(P, f, t, np.arange(-6, 6 + 1e-9, 1e-3))
print("max second difference of psi_t + phi:", rep.max_second_difference_total)
print("Hessian jumps:", [(round(float(a), 3), round(s, 4)) for a, s in rep.jumps])
print("det in the corner band <=", rep.max_det_corner, "; band", rep.band)
print("Lipschitz constant of mu_t:", rep.lipschitz_mu)
