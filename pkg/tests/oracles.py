"""Independent reference values, computed without the package's numerics."""
from math import comb

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def logistic(r):
    return 1.0 / (1.0 + np.exp(-r))


def golden_total(rho, t):
    """psi_t + phi on CP1 for f = |x - 1/2|, three branches."""
    rho = np.asarray(rho, dtype=float)
    return np.where(
        rho < -t,
        -t / 2 + np.logaddexp(0.0, rho + t),
        np.where(rho > t, t / 2 + np.logaddexp(0.0, rho - t), rho / 2 + np.log(2.0)),
    )


def golden_mu(rho, t):
    rho = np.asarray(rho, dtype=float)
    return np.where(rho < -t, logistic(rho + t), np.where(rho > t, logistic(rho - t), 0.5))


def binomial_weights(N, x):
    return np.array([comb(N, a) * x**a * (1 - x) ** (N - a) for a in range(N + 1)])


def log_q_simplex(alpha, N):
    """log of int over the unit simplex of x^alpha (1 - |x|)^(N - |alpha|) dx."""
    alpha = [int(a) for a in alpha]
    m = len(alpha)
    rest = N - sum(alpha)
    val = mp.fsum([mp.loggamma(a + 1) for a in alpha]) + mp.loggamma(rest + 1) - mp.loggamma(N + m + 1)
    return val


def log_q_box(alpha, N):
    """Product of Beta integrals for the unit cube."""
    return mp.fsum([mp.loggamma(a + 1) + mp.loggamma(N - a + 1) - mp.loggamma(N + 2) for a in alpha])


def lattice_simplex(N, m):
    pts = [p for p in np.ndindex(*(N + 1,) * m) if sum(p) <= N]
    return [tuple(p) for p in pts]


def lattice_box(N, m):
    return [tuple(p) for p in np.ndindex(*(N + 1,) * m)]


class BruteForce:
    """Direct extended-precision sums over the monomial basis of a simplex or cube."""

    def __init__(self, kind, m, N):
        self.kind, self.m, self.N = kind, m, N
        if kind == "simplex":
            self.alphas = lattice_simplex(N, m)
            self.logq = [log_q_simplex(a, N) for a in self.alphas]
            self.vertices = lattice_simplex(1, m)
        else:
            self.alphas = lattice_box(N, m)
            self.logq = [log_q_box(a, N) for a in self.alphas]
            self.vertices = lattice_box(1, m)

    def phi(self, rho):
        return mp.log(mp.fsum([mp.exp(mp.fsum([v * mp.mpf(r) for v, r in zip(p, rho)])) for p in self.vertices]))

    def log_terms(self, rho):
        N = self.N
        ph = self.phi(rho)
        return [
            mp.fsum([a * mp.mpf(r) for a, r in zip(alpha, rho)]) - N * ph - lq
            for alpha, lq in zip(self.alphas, self.logq)
        ]

    def weights(self, rho):
        lt = self.log_terms(rho)
        top = max(lt)
        w = [mp.exp(v - top) for v in lt]
        s = mp.fsum(w)
        return [v / s for v in w]

    def psi(self, f, t, rho):
        """(1/N) log sum exp(-t N f(alpha/N)) P(alpha) / Pi with f a python callable."""
        N = self.N
        w = self.weights(rho)
        tilt = [mp.exp(-mp.mpf(t) * N * f([mp.mpf(a) / N for a in alpha])) for alpha in self.alphas]
        return mp.log(mp.fsum([a * b for a, b in zip(w, tilt)])) / N

    def log_mgf(self, tau, rho):
        N = self.N
        w = self.weights(rho)
        e = [mp.exp(mp.fsum([a * mp.mpf(s) for a, s in zip(alpha, tau)])) for alpha in self.alphas]
        return mp.log(mp.fsum([a * b for a, b in zip(w, e)])) / N
