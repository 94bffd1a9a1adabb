"""Compiled inner loops for the fixed-point iterations.

Every kernel works on complex scalars and returns a status code instead of
raising, so the Python wrappers in :mod:`cnlfit.fde` can attach diagnostics.

Status codes: 0 converged, 1 iteration cap reached, 2 inner iteration cap
reached (subordination only), 3 singular denominator in ``G_a``.
"""

import math

import numpy as np
from numba import njit

CONVERGED = 0
MAX_ITER = 1
INNER_MAX_ITER = 2
SINGULAR = 3

SINGULAR_GUARD = 1e-30


@njit(cache=True)
def cw_r(b, v, d):
    s = 0j
    for vi in v:
        s += vi / (1.0 - vi * b)
    return s / d


@njit(cache=True)
def cw_solve(z, v, d, b, tol, max_iter, damping):
    """Iterate ``b -> (z - R(b))^-1`` (averaged if ``damping``).

    Stops on the first iterate whose undamped image is within
    ``tol * min(1, |image|)``; the scaling keeps the relative error small far
    from the spectrum, where ``|G|`` is tiny.
    Returns ``(b, n_evals, residual, status)``.
    """
    res = math.inf
    for n in range(1, max_iter + 1):
        f = 1.0 / (z - cw_r(b, v, d))
        res = abs(f - b)
        if res <= tol * min(1.0, abs(f)):
            return b, n, res, CONVERGED
        if damping:
            b = 0.5 * (b + f)
        else:
            b = f
    return b, max_iter, res, MAX_ITER


@njit(cache=True)
def sigma_solve(z1, z2, s2, ratio, g1, g2, tol, max_iter, damping):
    """Fixed point of ``B -> (Z - s2 * eta(B))^-1`` with ``eta(x, y) = (ratio*y, x)``.

    Same stopping rule as ``cw_solve`` with the Euclidean norm on C^2.
    Returns ``(g1, g2, n_evals, residual, status)``.
    """
    if s2 == 0.0:
        return 1.0 / z1, 1.0 / z2, 1, 0.0, CONVERGED
    res = math.inf
    for n in range(1, max_iter + 1):
        f1 = 1.0 / (z1 - s2 * ratio * g2)
        f2 = 1.0 / (z2 - s2 * g1)
        res = math.sqrt(abs(f1 - g1) ** 2 + abs(f2 - g2) ** 2)
        if res <= tol * min(1.0, math.sqrt(abs(f1) ** 2 + abs(f2) ** 2)):
            return g1, g2, n, res, CONVERGED
        if damping:
            g1 = 0.5 * (g1 + f1)
            g2 = 0.5 * (g2 + f2)
        else:
            g1 = f1
            g2 = f2
    return g1, g2, max_iter, res, MAX_ITER


@njit(cache=True)
def g_a(b1, b2, a, p, d):
    """Closed-form D2-valued Cauchy transform of the deterministic signal.

    Returns ``(G1, G2, status)``.
    """
    prod = b1 * b2
    s = 0j
    for ak in a:
        den = prod - ak * ak
        if abs(den) <= SINGULAR_GUARD:
            return 0j, 0j, SINGULAR
        s += 1.0 / den
    return b2 * s / d, b1 * s / p + (p - d) / (p * b2), CONVERGED


@njit(cache=True)
def spn_solve(w1, w2, a, s2, p, d, psi1, psi2, g1, g2,
              tol, max_iter, inner_tol, inner_max_iter, damping):
    """Undamped subordination ``psi -> h_a(h_sigma(psi) + W) + W``.

    ``g1, g2`` seed the inner sigma iteration; on return they hold
    ``G_sigma(psi)`` for the returned ``psi``.
    Returns ``(psi1, psi2, g1, g2, n_outer, n_inner, residual, status)``.
    """
    ratio = p / d
    total_inner = 0
    res = math.inf
    for n in range(1, max_iter + 1):
        g1, g2, k, _, st = sigma_solve(psi1, psi2, s2, ratio, g1, g2,
                                       inner_tol, inner_max_iter, damping)
        total_inner += k
        if st != CONVERGED:
            return psi1, psi2, g1, g2, n, total_inner, res, INNER_MAX_ITER
        u1 = 1.0 / g1 - psi1 + w1
        u2 = 1.0 / g2 - psi2 + w2
        ga1, ga2, st = g_a(u1, u2, a, p, d)
        if st != CONVERGED:
            return psi1, psi2, g1, g2, n, total_inner, res, SINGULAR
        f1 = 1.0 / ga1 - u1 + w1
        f2 = 1.0 / ga2 - u2 + w2
        res = math.sqrt(abs(f1 - psi1) ** 2 + abs(f2 - psi2) ** 2)
        if res <= tol:
            return psi1, psi2, g1, g2, n, total_inner, res, CONVERGED
        psi1 = f1
        psi2 = f2
    return psi1, psi2, g1, g2, max_iter, total_inner, res, MAX_ITER


def warmup():
    """Trigger compilation of every kernel (cached on disk afterwards)."""
    v = np.zeros(1)
    cw_solve(1j, v, 1, -1j, 1e-8, 10, True)
    spn_solve(1j, 1j, v, 0.01, 1, 1, 1j, 1j, -1j, -1j, 1e-8, 10, 1e-10, 10, True)
