"""Parameter estimation for compound Wishart and signal-plus-noise random
matrix models by minimizing the Cauchy noise loss over free deterministic
equivalents."""

__version__ = "0.1.0"

from .fde import FixedPointConfig, NonConvergenceError, cauchy_transform, gamma_slice  # noqa: E402
from .optim import RunConfig, initial_theta, run_ogd  # noqa: E402
from .recover import baseline_rank, determination_gap, recover_rank  # noqa: E402
from .spectra import CwParams, SpectrumSample, SpnParams, sample_cw, sample_spn  # noqa: E402

__all__ = [
    "CwParams",
    "FixedPointConfig",
    "NonConvergenceError",
    "RunConfig",
    "SpectrumSample",
    "SpnParams",
    "baseline_rank",
    "cauchy_transform",
    "determination_gap",
    "gamma_slice",
    "initial_theta",
    "recover_rank",
    "run_ogd",
    "sample_cw",
    "sample_spn",
]
