"""Validation losses comparing estimated and true parameters up to permutation."""

import numpy as np

from .spectra import CwParams, SpnParams


def v_cw(b, b_true) -> float:
    b, b_true = np.asarray(b, dtype=float), np.asarray(b_true, dtype=float)
    if b.shape != b_true.shape:
        raise ValueError(f"length mismatch: {b.shape} vs {b_true.shape}")
    return float(np.linalg.norm(np.sort(b) - np.sort(b_true)))


def v_spn(estimate, truth) -> float:
    """``estimate`` and ``truth`` are ``(a, sigma)`` pairs."""
    (a, sigma), (a_true, sigma_true) = estimate, truth
    return v_cw(a, a_true) + abs(float(sigma) - float(sigma_true))


def validation_loss(params, truth) -> float:
    if isinstance(params, CwParams):
        return v_cw(params.v, truth.v)
    if isinstance(params, SpnParams):
        return v_spn((params.a, params.sigma), (truth.a, truth.sigma))
    raise TypeError(f"unknown model parameters {type(params).__name__}")
