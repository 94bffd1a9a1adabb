"""Parameter gradients of the FDE Cauchy transforms by implicit differentiation.

At a fixed point ``B* = F(B*, theta)`` with ``|D_B F| < 1`` the derivative is
``dB*/dtheta = (I - D_B F)^-1 dF/dtheta``.  All derivatives are complex-linear;
the two-block quantities are handled as length-2 complex vectors and 2 x 2
complex Jacobians.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .fde import (
    D2Point,
    FixedPointConfig,
    NonConvergenceError,
    cw_cauchy,
    spn_cauchy,
    spn_subordination,
)
from .spectra import CwParams, SpnParams

DET_GUARD = 1e-30


class ContractionError(ArithmeticError):
    """The fixed-point map is not contracting at the supplied point."""


@dataclass
class GradientVector:
    """Complex partials of ``G(z)``: ``d_v`` (CW) or ``d_a`` and ``d_sigma`` (SPN)."""

    value: complex
    partials: np.ndarray
    contraction: float
    iterations: int = 0

    def as_array(self) -> np.ndarray:
        return self.partials


def implicit_solve_1d(dF_dfix: complex, dF_dparam):
    if abs(dF_dfix) >= 1:
        raise ContractionError(f"|dF/dB| = {abs(dF_dfix):.6g} >= 1; fixed point not converged?")
    return np.asarray(dF_dparam) / (1.0 - dF_dfix) if np.ndim(dF_dparam) else dF_dparam / (1.0 - dF_dfix)


def spectral_radius2(J: np.ndarray) -> float:
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = cmath.sqrt(tr * tr - 4 * det)
    return max(abs(0.5 * (tr + disc)), abs(0.5 * (tr - disc)))


def inverse2(M: np.ndarray) -> np.ndarray:
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= DET_GUARD:
        raise ContractionError(f"singular 2x2 system, |det| = {abs(det):.3g}")
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det


def implicit_solve_2d(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I - J) x = rhs``; ``rhs`` may hold several columns."""
    rho = spectral_radius2(J)
    if rho >= 1:
        raise ContractionError(f"spectral radius of the Jacobian is {rho:.6g} >= 1")
    return inverse2(np.eye(2) - J) @ rhs


# ---------------------------------------------------------------- CW ----

def cw_grad(z: complex, params: CwParams, cfg: FixedPointConfig | None = None,
            result=None) -> GradientVector:
    """``dG/dv_i`` for the CW transform at ``z``.

    ``result`` may carry an already converged forward solve at ``z``.
    """
    if result is None:
        result = cw_cauchy(z, params, cfg)
    g = result.value
    v, d = params.v, params.d
    inv_sq = 1.0 / (1.0 - v * g) ** 2
    dF_db = g * g * np.sum(v * v * inv_sq) / d
    dF_dv = g * g * inv_sq / d
    return GradientVector(g, implicit_solve_1d(dF_db, dF_dv), abs(dF_db), result.iterations)


# --------------------------------------------------------------- SPN ----

def _sigma_jacobians(g: D2Point, sigma: float, ratio: float):
    """Derivatives of ``G_sigma(Z)`` in ``Z`` (2x2) and in ``sigma`` (2,)."""
    g1, g2 = g
    s2 = sigma * sigma
    dF_dB = s2 * np.array([[0.0, ratio * g1 * g1], [g2 * g2, 0.0]])
    dF_dZ = np.diag([-g1 * g1, -g2 * g2])
    dF_ds = 2.0 * sigma * np.array([ratio * g2 * g1 * g1, g1 * g2 * g2])
    sol = implicit_solve_2d(dF_dB, np.column_stack([dF_dZ, dF_ds]))
    return sol[:, :2], sol[:, 2], spectral_radius2(dF_dB)


def _g_a_jacobians(U, a, p: int, d: int):
    """``G_a(U)`` with its 2x2 Jacobian in U and its (d, 2) partials in a."""
    u1, u2 = U
    inv = 1.0 / (u1 * u2 - a * a)
    s = inv.sum()
    s_sq = np.sum(inv * inv)
    ga = np.array([u2 * s / d, u1 * s / p + (p - d) / (p * u2)])
    jac = np.array([
        [-u2 * u2 * s_sq / d, (s - u1 * u2 * s_sq) / d],
        [(s - u1 * u2 * s_sq) / p, -u1 * u1 * s_sq / p - (p - d) / (p * u2 * u2)],
    ])
    da = np.column_stack([u2 / d * 2 * a * inv * inv, u1 / p * 2 * a * inv * inv])
    return ga, jac, da


def _spn_chain(Z, a, sigma, p, d, psi: D2Point, g: D2Point):
    """Jacobians needed downstream of a converged subordination at ``Z``.

    Returns ``(dpsi_da (d, 2), dpsi_dsigma (2,), dGs_dZ (2, 2), dGs_dsigma (2,), rho)``.
    """
    a = np.asarray(a, dtype=float)
    gs = np.array(g)
    dGs_dZ, dGs_ds, rho_in = _sigma_jacobians(g, sigma, p / d)
    # h_sigma(B) = G_sigma(B)^-1 - B
    dhs_dB = -np.diag(1.0 / gs ** 2) @ dGs_dZ - np.eye(2)
    dhs_ds = -dGs_ds / gs ** 2
    U = 1.0 / gs - np.array(psi) + np.array(Z)
    ga, dGa_dU, dGa_da = _g_a_jacobians(U, a, p, d)
    dha_dU = -np.diag(1.0 / ga ** 2) @ dGa_dU - np.eye(2)
    dha_da = -dGa_da / ga ** 2
    dPsi_dB = dha_dU @ dhs_dB
    rhs = np.column_stack([dha_da.T, dha_dU @ dhs_ds])
    sol = implicit_solve_2d(dPsi_dB, rhs)
    rho = max(rho_in, spectral_radius2(dPsi_dB))
    return sol[:, :-1].T, sol[:, -1], dGs_dZ, dGs_ds, rho


def spn_psi_grads(Z, a, sigma: float, p: int, d: int, cfg: FixedPointConfig | None = None):
    """Derivatives of the subordination function ``psi(Z)`` in ``a_k`` and ``sigma``."""
    res = spn_subordination(Z, a, sigma, p, d, cfg)
    dpsi_da, dpsi_ds, *_ = _spn_chain(Z, a, sigma, p, d, res.psi, res.g_sigma)
    return [D2Point(complex(x), complex(y)) for x, y in dpsi_da], D2Point(*map(complex, dpsi_ds))


def spn_grad(z: complex, params: SpnParams, cfg: FixedPointConfig | None = None,
             result=None) -> GradientVector:
    """``(dG/da_1, .., dG/da_d, dG/dsigma)`` for the SPN transform at ``z``."""
    if result is None:
        result = spn_cauchy(z, params, cfg)
    if result.psi is None:
        raise NonConvergenceError("SPN gradient needs the subordination state of the forward pass")
    w = cmath.sqrt(complex(z))
    dpsi_da, dpsi_ds, dGs_dZ, dGs_ds, rho = _spn_chain(
        (w, w), params.a, params.sigma, params.p, params.d, result.psi, result.g_sigma)
    row = dGs_dZ[0]
    d_a = (dpsi_da @ row) / w
    d_s = (row @ dpsi_ds + dGs_ds[0]) / w
    return GradientVector(result.value, np.append(d_a, d_s), rho, result.total_iterations)


def model_grad(z: complex, params, cfg: FixedPointConfig | None = None, result=None) -> GradientVector:
    if isinstance(params, CwParams):
        return cw_grad(z, params, cfg, result)
    return spn_grad(z, params, cfg, result)
