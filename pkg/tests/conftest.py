import math

import numpy as np
import pytest
from scipy import integrate

from cnlfit.fde import FixedPointConfig

# forward solves accurate enough for step-1e-6 central differences
TIGHT = FixedPointConfig(tolerance=1e-14)


def mp_density(x):
    """Marchenko-Pastur law with ratio 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 4)
    xi = x[inside]
    out[inside] = np.sqrt(xi * (4 - xi)) / (2 * np.pi * xi)
    return out


def mp_smoothed(x: float, gamma: float) -> float:
    """Cauchy-smoothed MP(1) density by quadrature.

    With t = 4 sin^2(phi) the density element becomes (4/pi) cos^2(phi) dphi,
    which removes both endpoint singularities.
    """
    def f(phi):
        t = 4.0 * math.sin(phi) ** 2
        return (gamma / math.pi) / ((x - t) ** 2 + gamma ** 2) * (4 / math.pi) * math.cos(phi) ** 2

    # the kernel peaks where t = x; split there so quad sees it
    pts = [math.asin(math.sqrt(x / 4))] if 0 < x < 4 else None
    val, _ = integrate.quad(f, 0.0, math.pi / 2, points=pts, limit=500, epsabs=1e-12, epsrel=1e-10)
    return val


def central_diff(f, theta, k, h=1e-6):
    e = np.zeros_like(theta)
    e[k] = h
    return (f(theta + e) - f(theta - e)) / (2 * h)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(b), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary and return the verdict."""
    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
