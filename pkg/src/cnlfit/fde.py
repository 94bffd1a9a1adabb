"""Cauchy transforms of the free deterministic equivalents of the CW and SPN
models.

CW uses the scalar fixed point ``b -> (z - R(b, v))^-1`` (averaged).  SPN is
reduced to the two-block diagonal algebra, represented here as pairs of complex
numbers, and solved by subordination; each subordination step needs the
semicircular part ``G_sigma``, itself a damped fixed point.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .spectra import CwParams, SpnParams

CW_START = -1j
SIGMA_START = (-1j, -1j)
SUBORDINATION_START = (1j, 1j)
# double precision cannot resolve the nested G_sigma loop much below this
INNER_TOLERANCE_FLOOR = 1e-15


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (iterations={iterations}, last residual={residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class SingularDenominatorError(ArithmeticError):
    pass


class D2Point(NamedTuple):
    """Element ``b1 Q + b2 Q^perp`` of the two-block diagonal algebra."""

    b1: complex
    b2: complex

    def inv(self) -> D2Point:
        return D2Point(1.0 / self.b1, 1.0 / self.b2)

    def __add__(self, other):
        return D2Point(self.b1 + other[0], self.b2 + other[1])

    def __sub__(self, other):
        return D2Point(self.b1 - other[0], self.b2 - other[1])

    def norm(self) -> float:
        return float(np.hypot(abs(self.b1), abs(self.b2)))


@dataclass
class WarmStart:
    """Last solutions of one evaluation context, reused as initial points."""

    cw: complex | None = None
    psi: tuple[complex, complex] | None = None
    g_sigma: tuple[complex, complex] | None = None


@dataclass
class FixedPointConfig:
    tolerance: float = 1e-8
    max_iterations: int = 100_000
    damping: bool = True
    warm_start: WarmStart | None = None
    # stopping threshold of the G_sigma loop nested in subordination
    inner_tolerance: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def inner_tol(self) -> float:
        if self.inner_tolerance is not None:
            return self.inner_tolerance
        return max(1e-2 * self.tolerance, INNER_TOLERANCE_FLOOR)


@dataclass
class TransformResult:
    value: complex | D2Point
    iterations: int
    residual: float
    inner_iterations: int = 0
    psi: D2Point | None = field(default=None, repr=False)
    g_sigma: D2Point | None = field(default=None, repr=False)

    @property
    def total_iterations(self) -> int:
        """Evaluations of the method-I map (the inner map for SPN)."""
        return self.inner_iterations or self.iterations


def _check_upper(z):
    if not z.imag > 0:
        raise ValueError(f"need Im z > 0, got z = {z}")


# ---------------------------------------------------------------- CW ----

def cw_r(b: complex, v, d: int) -> complex:
    return complex(K.cw_r(complex(b), np.asarray(v, dtype=float), d))


def cw_cauchy(z: complex, params: CwParams, cfg: FixedPointConfig | None = None) -> TransformResult:
    cfg = cfg or FixedPointConfig()
    z = complex(z)
    _check_upper(z)
    ws = cfg.warm_start
    b0 = ws.cw if ws is not None and ws.cw is not None else CW_START
    b, n, res, status = K.cw_solve(z, params.v, params.d, b0, cfg.tolerance,
                                   cfg.max_iterations, cfg.damping)
    if status != K.CONVERGED:
        raise NonConvergenceError(f"CW fixed point did not converge at z={z}", res, n)
    if ws is not None:
        ws.cw = b
    return TransformResult(complex(b), n, res)


# --------------------------------------------------------------- SPN ----

def eta2(B, p: int, d: int) -> D2Point:
    return D2Point((p / d) * B[1], B[0])


def spn_g_sigma(Z, sigma: float, p: int, d: int, cfg: FixedPointConfig | None = None,
                start=None) -> D2Point:
    """D2-valued Cauchy transform of ``sigma S`` at ``Z`` in the upper half-plane."""
    cfg = cfg or FixedPointConfig()
    z1, z2 = complex(Z[0]), complex(Z[1])
    _check_upper(z1)
    _check_upper(z2)
    g1, g2 = start if start is not None else SIGMA_START
    g1, g2, n, res, status = K.sigma_solve(z1, z2, float(sigma) ** 2, p / d, complex(g1),
                                           complex(g2), cfg.tolerance, cfg.max_iterations,
                                           cfg.damping)
    if status != K.CONVERGED:
        raise NonConvergenceError(f"G_sigma fixed point did not converge at Z={Z}", res, n)
    return D2Point(complex(g1), complex(g2))


def spn_g_a(B, a, p: int, d: int) -> D2Point:
    """Closed-form D2-valued Cauchy transform of the signal part."""
    g1, g2, status = K.g_a(complex(B[0]), complex(B[1]), np.asarray(a, dtype=float), p, d)
    if status == K.SINGULAR:
        raise SingularDenominatorError(f"b1*b2 - a_k^2 vanishes at B={tuple(B)}")
    return D2Point(complex(g1), complex(g2))


def h_a(B, a, p: int, d: int) -> D2Point:
    return spn_g_a(B, a, p, d).inv() - B


def h_sigma(B, sigma: float, p: int, d: int, cfg: FixedPointConfig | None = None) -> D2Point:
    return spn_g_sigma(B, sigma, p, d, cfg).inv() - B


def _subordinate(w1, w2, a, sigma, p, d, cfg):
    ws = cfg.warm_start
    psi0 = ws.psi if ws is not None and ws.psi is not None else SUBORDINATION_START
    g0 = ws.g_sigma if ws is not None and ws.g_sigma is not None else SIGMA_START
    out = K.spn_solve(w1, w2, a, float(sigma) ** 2, p, d, complex(psi0[0]), complex(psi0[1]),
                      complex(g0[0]), complex(g0[1]), cfg.tolerance, cfg.max_iterations,
                      cfg.inner_tol, cfg.max_iterations, cfg.damping)
    psi1, psi2, g1, g2, n, n_inner, res, status = out
    if status == K.SINGULAR:
        raise SingularDenominatorError("b1*b2 - a_k^2 vanished during subordination")
    if status != K.CONVERGED:
        which = "inner G_sigma" if status == K.INNER_MAX_ITER else "subordination"
        raise NonConvergenceError(f"{which} iteration did not converge at Z=({w1}, {w2})", res, n)
    if ws is not None:
        ws.psi = (psi1, psi2)
        ws.g_sigma = (g1, g2)
    return D2Point(complex(psi1), complex(psi2)), D2Point(complex(g1), complex(g2)), n, n_inner, res


def spn_subordination(Z, a, sigma: float, p: int, d: int,
                      cfg: FixedPointConfig | None = None) -> TransformResult:
    """Subordination function ``psi(Z)``; value is the fixed point of Psi_Z."""
    cfg = cfg or FixedPointConfig()
    z1, z2 = complex(Z[0]), complex(Z[1])
    _check_upper(z1)
    _check_upper(z2)
    psi, g, n, n_inner, res = _subordinate(z1, z2, np.asarray(a, dtype=float), sigma, p, d, cfg)
    return TransformResult(psi, n, res, n_inner, psi, g)


def spn_cauchy(z: complex, params: SpnParams, cfg: FixedPointConfig | None = None) -> TransformResult:
    cfg = cfg or FixedPointConfig()
    z = complex(z)
    _check_upper(z)
    w = cmath.sqrt(z)
    psi, g, n, n_inner, res = _subordinate(w, w, params.a, params.sigma, params.p, params.d, cfg)
    return TransformResult(g.b1 / w, n, res, n_inner, psi, g)


# ------------------------------------------------------------ generic ----

def cauchy_transform(params, z: complex, cfg: FixedPointConfig | None = None) -> TransformResult:
    if isinstance(params, CwParams):
        return cw_cauchy(z, params, cfg)
    if isinstance(params, SpnParams):
        return spn_cauchy(z, params, cfg)
    raise TypeError(f"unknown model parameters {type(params).__name__}")


def gamma_slice(params, x: float, gamma: float, cfg: FixedPointConfig | None = None) -> float:
    """``-Im G(x + i gamma) / pi``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return -cauchy_transform(params, complex(x, gamma), cfg).value.imag / np.pi


def gamma_slice_grid(params, xs, gamma: float, cfg: FixedPointConfig | None = None):
    """Slice values on a grid, warm-starting each point from its neighbour.

    Returns ``(values, iterations, residuals)`` arrays.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    base = cfg or FixedPointConfig()
    local = FixedPointConfig(base.tolerance, base.max_iterations, base.damping, WarmStart(),
                             base.inner_tolerance)
    xs = np.asarray(xs, dtype=float)
    values = np.empty(xs.shape)
    iters = np.empty(xs.shape, dtype=int)
    resid = np.empty(xs.shape)
    for i, x in enumerate(xs.flat):
        r = cauchy_transform(params, complex(x, gamma), local)
        values.flat[i] = -r.value.imag / np.pi
        iters.flat[i] = r.total_iterations
        resid.flat[i] = r.residual
    return values, iters, resid
