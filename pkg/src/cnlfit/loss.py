"""Cauchy noise loss, its gradient, Cauchy cross-entropy estimators and the
L1 penalty."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fde import FixedPointConfig, cauchy_transform, gamma_slice_grid
from .grad import model_grad
from .spectra import STREAM_MONTE_CARLO, SpectrumSample, make_rng


@dataclass
class LossPoint:
    x: float
    j: int
    t: float


@dataclass
class CceEstimate:
    value: float
    standard_error: float


def cauchy_from_uniform(u: float, gamma: float) -> float:
    """Inverse CDF of Cauchy(0, gamma)."""
    return gamma * math.tan(math.pi * (u - 0.5))


def draw_cauchy(gamma: float, rng: np.random.Generator) -> float:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    u = rng.random()
    while u == 0.0:  # random() samples [0, 1)
        u = rng.random()
    return cauchy_from_uniform(u, gamma)


def draw_loss_point(eigenvalues: np.ndarray, gamma: float, rng: np.random.Generator) -> LossPoint:
    j = int(rng.integers(eigenvalues.size))
    t = draw_cauchy(gamma, rng)
    return LossPoint(float(eigenvalues[j]) + t, j, t)


def cnl_value(x: float, params, gamma: float, cfg: FixedPointConfig | None = None) -> float:
    """``-log`` of the gamma-slice of the model at ``x``."""
    g = cauchy_transform(params, complex(x, gamma), cfg).value
    return -math.log(-g.imag / math.pi)


def loss_and_grad(x: float, params, gamma: float, cfg: FixedPointConfig | None = None):
    """Loss value, real gradient and the forward ``TransformResult`` at ``x``."""
    z = complex(x, gamma)
    fwd = cauchy_transform(params, z, cfg)
    gv = model_grad(z, params, cfg, fwd)
    g = fwd.value
    value = -math.log(-g.imag / math.pi)
    return value, -gv.partials.imag / g.imag, fwd


def cnl_grad(x: float, params, gamma: float, cfg: FixedPointConfig | None = None) -> np.ndarray:
    """``-Im grad G / Im G`` evaluated at ``x + i gamma``."""
    return loss_and_grad(x, params, gamma, cfg)[1]


def ecce_monte_carlo(s: SpectrumSample, params, gamma: float, n_draws: int, seed: int,
                     cfg: FixedPointConfig | None = None) -> CceEstimate:
    """Monte Carlo estimate of ``E[loss(lambda_j + T)]`` over the sample's ESD."""
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = make_rng(seed, STREAM_MONTE_CARLO)
    lam = s.eigenvalues if isinstance(s, SpectrumSample) else np.asarray(s, dtype=float)
    vals = np.array([cnl_value(draw_loss_point(lam, gamma, rng).x, params, gamma, cfg)
                     for _ in range(n_draws)])
    se = float(vals.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else float("nan")
    return CceEstimate(float(vals.mean()), se)


def tail_bound(gamma: float, L: float) -> float:
    """Order of the mass of ``loss * density`` outside ``[-L, L]``.

    Uses ``loss ~ 2 log|x|`` and density ``~ gamma / (pi x^2)`` on both tails.
    """
    return 4.0 * gamma * (math.log(L) + 1.0) / (math.pi * L)


def ecce_quadrature(reference_slice, params, gamma: float, L: float = 50.0, n: int = 2001,
                    cfg: FixedPointConfig | None = None, loss_values=None) -> CceEstimate:
    """Trapezoid rule for ``int loss(x) * reference_slice(x) dx`` over ``[-L, L]``.

    ``reference_slice`` is a vectorized callable; ``loss_values`` may supply
    precomputed losses on the same grid.
    """
    if L <= 0 or n < 2:
        raise ValueError("need L > 0 and n >= 2")
    xs = np.linspace(-L, L, n)
    ref = np.asarray(reference_slice(xs), dtype=float)
    if loss_values is None:
        loss_values = cnl_grid(params, xs, gamma, cfg)
    return CceEstimate(float(np.trapezoid(loss_values * ref, xs)), tail_bound(gamma, L))


def cnl_grid(params, xs, gamma: float, cfg: FixedPointConfig | None = None) -> np.ndarray:
    slices, _, _ = gamma_slice_grid(params, xs, gamma, cfg)
    return -np.log(slices)


def l1_penalty(a, xi: float) -> float:
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    return float(xi * np.sum(np.abs(a)))


def l1_subgrad(a, xi: float) -> np.ndarray:
    """``xi * sign(a)`` with ``sign(0) = 0``."""
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    return xi * np.sign(np.asarray(a, dtype=float))
