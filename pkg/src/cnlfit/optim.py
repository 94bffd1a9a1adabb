"""Projected online gradient descent with Adam on the Cauchy noise loss."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fde import FixedPointConfig, NonConvergenceError, SingularDenominatorError, WarmStart
from .grad import ContractionError
from .loss import draw_loss_point, l1_subgrad, loss_and_grad
from .metrics import validation_loss
from .spectra import (
    DEFAULT_BOUND_CW,
    DEFAULT_BOUND_SPN,
    STREAM_INIT,
    STREAM_OPTIM,
    CwParams,
    SpectrumSample,
    SpnParams,
    make_rng,
)

log = logging.getLogger(__name__)

SPN_INITIAL_SIGMA = 0.2


class RunAborted(RuntimeError):
    """Too many consecutive forward solves failed."""


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, k: int, **hyper) -> AdamState:
        return cls(np.zeros(k), np.zeros(k), **hyper)


def adam_step(state: AdamState, grad, theta) -> tuple[AdamState, np.ndarray]:
    grad = np.asarray(grad, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if grad.shape != theta.shape or grad.shape != state.m.shape:
        raise ValueError(f"shape mismatch: grad {grad.shape}, theta {theta.shape}, state {state.m.shape}")
    n = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1 ** n)
    v_hat = v / (1 - state.beta2 ** n)
    theta = theta - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=n), theta


def project(theta, bound: float) -> np.ndarray:
    """Clamp onto the box ``[-bound, bound]^k``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    return np.clip(np.asarray(theta, dtype=float), -bound, bound)


def default_bound(model: str) -> float:
    return DEFAULT_BOUND_CW if model == "cw" else DEFAULT_BOUND_SPN


@dataclass
class RunConfig:
    gamma: float = 0.1
    n_iterations: int = 20_000
    xi: float = 0.0
    seed: int = 0
    bound: float | None = None
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    record_every: int = 100
    failure_budget: int = 10
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")


@dataclass
class TraceRecord:
    iteration: int
    loss_sample: float
    validation_loss: float
    inner_iterations: int


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)
    initial_validation: float = math.nan
    total_inner_iterations: int = 0
    steps_taken: int = 0
    failures: int = 0

    @property
    def mean_inner_iterations(self) -> float:
        return self.total_inner_iterations / max(self.steps_taken, 1)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, comments=()) -> str:
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        buf.write(f"# initial_validation_loss={float(self.initial_validation)!r}\n")
        buf.write("iteration,loss_sample,validation_loss,inner_iterations\n")
        for r in self.records:
            buf.write(f"{r.iteration},{float(r.loss_sample)!r},{float(r.validation_loss)!r},{r.inner_iterations}\n")
        return buf.getvalue()


def initial_theta(model: str, sample: SpectrumSample, bound: float | None = None, seed: int = 0,
                  p: int | None = None, init: str = "eigenvalues"):
    """Starting point of a run.

    CW draws ``v`` uniformly from ``[-1/sqrt(p), 1/sqrt(p)]^p``.  SPN sets
    ``sigma = 0.2`` and ``a`` to the sample eigenvalues (``init="eigenvalues"``)
    or their square roots (``init="sqrt-eigenvalues"``), clamped to the box.
    """
    bound = default_bound(model) if bound is None else bound
    p = sample.p if p is None else p
    if model == "cw":
        rng = make_rng(seed, STREAM_INIT)
        half = 1.0 / math.sqrt(p)
        return CwParams(project(rng.uniform(-half, half, size=p), bound), sample.d, bound)
    if model == "spn":
        lam = sample.eigenvalues
        if init == "sqrt-eigenvalues":
            a = np.sqrt(np.clip(lam, 0.0, None))
        elif init == "eigenvalues":
            a = lam.copy()
        else:
            raise ValueError(f"unknown SPN initializer {init!r}")
        return SpnParams(project(a, bound), min(SPN_INITIAL_SIGMA, bound), p, bound)
    raise ValueError(f"unknown model {model!r}")


def _penalized_coordinates(params) -> slice:
    # L1 acts on the singular values a only, never on sigma
    return slice(0, params.d) if isinstance(params, SpnParams) else slice(None)


def run_ogd(sample: SpectrumSample, theta0, cfg: RunConfig, ground_truth=None):
    """Run ``cfg.n_iterations`` projected Adam steps from ``theta0``.

    Returns ``(theta_final, trace)``.  A failed forward solve skips its step;
    ``cfg.failure_budget`` consecutive failures abort the run.
    """
    bound = cfg.bound if cfg.bound is not None else theta0.bound
    params = theta0.with_vector(project(theta0.to_vector(), bound))
    params = replace(params, bound=bound)
    lam = np.sort(sample.eigenvalues)
    rng = make_rng(cfg.seed, STREAM_OPTIM)
    fp = replace(cfg.fixed_point, warm_start=WarmStart())
    state = AdamState.zeros(params.to_vector().size, alpha=cfg.alpha, beta1=cfg.beta1,
                            beta2=cfg.beta2, eps=cfg.eps)
    trace = RunTrace()
    if ground_truth is not None:
        trace.initial_validation = validation_loss(params, ground_truth)
    penalized = _penalized_coordinates(params)
    theta = params.to_vector()
    consecutive = 0
    loss = math.nan
    for n in range(1, cfg.n_iterations + 1):
        point = draw_loss_point(lam, cfg.gamma, rng)
        try:
            loss, grad, fwd = loss_and_grad(point.x, params, cfg.gamma, fp)
        except (NonConvergenceError, ContractionError, SingularDenominatorError) as exc:
            trace.failures += 1
            consecutive += 1
            fp.warm_start = WarmStart()
            log.debug("step %d skipped: %s", n, exc)
            if consecutive >= cfg.failure_budget:
                raise RunAborted(f"{consecutive} consecutive forward failures, last at step {n} "
                                 f"(x={point.x:.6g}): {exc}") from exc
        else:
            consecutive = 0
            trace.steps_taken += 1
            trace.total_inner_iterations += fwd.total_iterations
            if cfg.xi > 0:
                grad[penalized] += l1_subgrad(theta[penalized], cfg.xi)
            state, theta = adam_step(state, grad, theta)
            theta = project(theta, bound)
            params = params.with_vector(theta)
        if n % cfg.record_every == 0 or n == cfg.n_iterations:
            val = validation_loss(params, ground_truth) if ground_truth is not None else math.nan
            trace.records.append(TraceRecord(n, loss, val, trace.total_inner_iterations))
    return params, trace
