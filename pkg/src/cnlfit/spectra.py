"""Sampling of compound Wishart / signal-plus-noise matrices and empirical
spectral oracles (Cauchy transform, Poisson smoothing, moments).

Random streams are Philox generators keyed by ``SeedSequence([seed, stream])``
so that a sample, its ground truth and the optimizer noise never share draws.
Gaussian entries come from numpy's ziggurat sampler.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

Field = Literal["real", "complex"]

# independent stream identifiers
STREAM_SAMPLE = 0
STREAM_TRUTH = 1
STREAM_OPTIM = 2
STREAM_MONTE_CARLO = 3
STREAM_INIT = 4
STREAM_THETA = 5

DEFAULT_BOUND_CW = 1.0
DEFAULT_BOUND_SPN = 1.2


class EigenSolverError(RuntimeError):
    pass


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Philox generator for ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class GinibreSpec:
    p: int
    d: int
    field: Field = "real"

    def __post_init__(self):
        if self.p < 1 or self.d < 1:
            raise ValueError(f"Ginibre dimensions must be positive, got p={self.p}, d={self.d}")
        if self.field not in ("real", "complex"):
            raise ValueError(f"field must be 'real' or 'complex', got {self.field!r}")


@dataclass(frozen=True, eq=False)
class CwParams:
    """Compound Wishart parameters: eigenvalues ``v`` of the p x p middle matrix."""

    v: np.ndarray
    d: int
    bound: float = DEFAULT_BOUND_CW

    model = "cw"

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(-1)
        object.__setattr__(self, "v", v)
        if self.d < 1 or v.size < 1:
            raise ValueError("CW parameters need d >= 1 and a non-empty v")
        if v.size and np.max(np.abs(v)) > self.bound:
            raise ValueError(f"max|v| = {np.max(np.abs(v)):.6g} exceeds bound M = {self.bound}")

    @property
    def p(self) -> int:
        return self.v.size

    def to_vector(self) -> np.ndarray:
        return self.v.copy()

    def with_vector(self, theta) -> CwParams:
        return CwParams(np.asarray(theta, dtype=float), self.d, self.bound)


@dataclass(frozen=True, eq=False)
class SpnParams:
    """Signal-plus-noise parameters: singular values ``a`` and noise scale ``sigma``."""

    a: np.ndarray
    sigma: float
    p: int
    bound: float = DEFAULT_BOUND_SPN

    model = "spn"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", float(self.sigma))
        if a.size < 1:
            raise ValueError("SPN parameters need a non-empty a")
        if self.p < a.size:
            raise ValueError(f"SPN model needs p >= d, got p={self.p}, d={a.size}")
        if np.max(np.abs(a)) > self.bound or abs(self.sigma) > self.bound:
            raise ValueError(f"(a, sigma) outside the box of half-width M = {self.bound}")

    @property
    def d(self) -> int:
        return self.a.size

    def to_vector(self) -> np.ndarray:
        return np.append(self.a, self.sigma)

    def with_vector(self, theta) -> SpnParams:
        theta = np.asarray(theta, dtype=float)
        return SpnParams(theta[:-1], theta[-1], self.p, self.bound)


@dataclass(eq=False)
class SpectrumSample:
    """Ascending eigenvalues of one observed d x d self-adjoint sample."""

    eigenvalues: np.ndarray
    p: int
    d: int
    seed: int | None = None
    model: str | None = None
    comments: list[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        if lam.size != self.d:
            raise ValueError(f"expected {self.d} eigenvalues, got {lam.size}")
        if np.any(np.diff(lam) < 0):
            lam = np.sort(lam)
        self.eigenvalues = lam

    def to_csv(self, extra_comments=()) -> str:
        buf = io.StringIO()
        buf.write(f"# p={self.p} d={self.d} seed={self.seed} model={self.model}\n")
        for c in extra_comments:
            buf.write(f"# {c}\n")
        for x in self.eigenvalues:
            buf.write(f"{float(x)!r}\n")
        return buf.getvalue()

    def save(self, path, extra_comments=()) -> None:
        Path(path).write_text(self.to_csv(extra_comments), encoding="utf-8")

    @classmethod
    def load(cls, path) -> SpectrumSample:
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_csv(cls, text: str) -> SpectrumSample:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("missing '# p=.. d=.. seed=.. model=..' header")
        meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split())
        values = [float(s) for s in lines[1:] if s.strip() and not s.startswith("#")]
        seed = None if meta.get("seed", "None") == "None" else int(meta["seed"])
        model = None if meta.get("model", "None") == "None" else meta["model"]
        return cls(np.array(values), int(meta["p"]), int(meta["d"]), seed, model,
                   [s[1:].strip() for s in lines[1:] if s.startswith("#")])


def sample_ginibre(spec: GinibreSpec, seed: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """p x d Ginibre matrix with entry variance ``1/d``."""
    if rng is None:
        rng = make_rng(seed, STREAM_SAMPLE)
    scale = 1.0 / np.sqrt(spec.d)
    if spec.field == "real":
        return scale * rng.standard_normal((spec.p, spec.d))
    f = rng.standard_normal((spec.p, spec.d))
    g = rng.standard_normal((spec.p, spec.d))
    return scale * (f + 1j * g) / np.sqrt(2.0)


def eigvals_selfadjoint(matrix) -> np.ndarray:
    """Ascending eigenvalues of a numerically self-adjoint matrix."""
    x = np.asarray(matrix)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    scale = np.max(np.abs(x)) if x.size else 0.0
    asym = np.max(np.abs(x - x.conj().T)) if x.size else 0.0
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not self-adjoint: max|X - X*| = {asym:.3g}, max|X| = {scale:.3g}")
    try:
        return np.linalg.eigvalsh(x)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(
            f"eigensolver did not converge (n={x.shape[0]}, max|X|={scale:.3g}, "
            f"finite={np.all(np.isfinite(x))})") from exc


def _hermitian_part(w: np.ndarray) -> np.ndarray:
    return 0.5 * (w + w.conj().T)


def sample_cw(params: CwParams, field: Field = "real", seed: int = 0) -> SpectrumSample:
    """Eigenvalues of ``Z* diag(v) Z`` with Z a p x d Ginibre matrix."""
    z = sample_ginibre(GinibreSpec(params.p, params.d, field), seed)
    w = z.conj().T @ (params.v[:, None] * z)
    return SpectrumSample(eigvals_selfadjoint(_hermitian_part(w)), params.p, params.d, seed, "cw")


def signal_matrix(a, p: int) -> np.ndarray:
    """Rectangular p x d diagonal embedding of ``a``."""
    a = np.asarray(a, dtype=float)
    out = np.zeros((p, a.size))
    out[np.arange(a.size), np.arange(a.size)] = a
    return out


def sample_spn(params: SpnParams, field: Field = "real", seed: int = 0) -> SpectrumSample:
    """Eigenvalues of ``(A + sigma Z)*(A + sigma Z)`` with A = diag embedding of a."""
    z = sample_ginibre(GinibreSpec(params.p, params.d, field), seed)
    x = signal_matrix(params.a, params.p) + params.sigma * z
    w = x.conj().T @ x
    return SpectrumSample(eigvals_selfadjoint(_hermitian_part(w)), params.p, params.d, seed, "spn")


def sample_true_spn_experiment(p: int, d: int, d_true: int, lambda_min: float,
                               sigma_true: float, seed: int,
                               field: Field = "real") -> tuple[SpnParams, SpectrumSample]:
    """Ground truth ``a = (0, .., 0, x_1, .., x_{d_true})`` with ``x_k ~ U[lambda_min, 1]``
    and one sample drawn from it.

    The random orthogonal rotation of the signal is skipped: the spectrum law
    does not depend on it.
    """
    if not 0 <= d_true <= d <= p:
        raise ValueError(f"need 0 <= d_true <= d <= p, got d_true={d_true}, d={d}, p={p}")
    if not 0 <= lambda_min <= 1:
        raise ValueError(f"lambda_min must lie in [0, 1], got {lambda_min}")
    rng = make_rng(seed, STREAM_TRUTH)
    a = np.zeros(d)
    a[d - d_true:] = rng.uniform(lambda_min, 1.0, size=d_true)
    truth = SpnParams(a, sigma_true, p, bound=max(DEFAULT_BOUND_SPN, abs(sigma_true)))
    return truth, sample_spn(truth, field, seed)


def sample_true_cw_experiment(p: int, d: int, seed: int, half_width: float = 0.1,
                              field: Field = "real") -> tuple[CwParams, SpectrumSample]:
    """Ground truth ``v ~ U[-half_width, half_width]^p`` and one sample from it."""
    rng = make_rng(seed, STREAM_TRUTH)
    truth = CwParams(rng.uniform(-half_width, half_width, size=p), d)
    return truth, sample_cw(truth, field, seed)


def sample_model(params, field: Field = "real", seed: int = 0) -> SpectrumSample:
    if isinstance(params, CwParams):
        return sample_cw(params, field, seed)
    return sample_spn(params, field, seed)


def _eigenvalues(s) -> np.ndarray:
    return s.eigenvalues if isinstance(s, SpectrumSample) else np.asarray(s, dtype=float)


def empirical_cauchy(z, s):
    """``(1/d) sum_k 1/(z - lambda_k)``; ``z`` may be an array."""
    lam = _eigenvalues(s)
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("empirical_cauchy needs Im z > 0")
    out = np.mean(1.0 / (z[..., None] - lam), axis=-1)
    return out[()] if out.ndim == 0 else out


def poisson_kernel(x, gamma: float):
    return (gamma / np.pi) / (np.square(x) + gamma * gamma)


def poisson_smooth(x, gamma: float, s):
    """Density of ``lambda + T`` with lambda ~ ESD and T ~ Cauchy(0, gamma)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    lam = _eigenvalues(s)
    x = np.asarray(x, dtype=float)
    out = np.mean(poisson_kernel(x[..., None] - lam, gamma), axis=-1)
    return out[()] if out.ndim == 0 else out


def moment(s, k: int) -> float:
    if k < 1:
        raise ValueError("moment order must be >= 1")
    return float(np.mean(_eigenvalues(s) ** k))
