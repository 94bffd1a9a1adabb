import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnlfit.fde import (
    D2Point,
    FixedPointConfig,
    NonConvergenceError,
    SingularDenominatorError,
    TransformResult,
    WarmStart,
    cauchy_transform,
    cw_cauchy,
    cw_r,
    eta2,
    gamma_slice,
    gamma_slice_grid,
    h_a,
    h_sigma,
    spn_cauchy,
    spn_g_a,
    spn_g_sigma,
    spn_subordination,
)
from cnlfit.spectra import CwParams, SpnParams


def semicircle(z):
    """Root of g^2 - z g + 1 = 0 in the lower half-plane."""
    r = np.roots([1, -z, 1])
    return r[np.argmin(r.imag)]


def cw_params(rng, p=50, d=50, m=1.0):
    return CwParams(rng.uniform(-m, m, p), d)


def spn_params(rng, p=50, d=50, m=1.2):
    return SpnParams(rng.uniform(-m, m, d), rng.uniform(-m, m), p)


upper = st.tuples(st.floats(-3, 7), st.floats(0.01, 3)).map(lambda t: complex(*t))


class TestCwR:
    def test_zero(self):
        assert cw_r(-1j, np.zeros(5), 5) == 0

    def test_identical_terms(self):
        b, c = 0.3 - 0.7j, 0.4
        assert cw_r(b, np.full(6, c), 3) == pytest.approx(2 * c / (1 - c * b))

    def test_arithmetic(self):
        assert cw_r(-1j, np.array([1.0]), 1) == pytest.approx(0.5 - 0.5j)

    @given(st.floats(-3, 3), st.floats(-5, -1e-3))
    def test_sign(self, re, im):
        v = np.linspace(-1, 1, 9)
        assert cw_r(complex(re, im), v, 9).imag <= 1e-15


class TestCwCauchy:
    def test_point_mass(self):
        r = cw_cauchy(1j, CwParams(np.zeros(4), 4))
        assert r.value == pytest.approx(-1j)

    def test_normalization(self, rng):
        p = cw_params(rng)
        y = 1e6
        assert abs(1j * y * cw_cauchy(1j * y, p).value - 1) < 1e-4

    def test_residual_contract(self, rng):
        p = cw_params(rng)
        cfg = FixedPointConfig()
        for z in [0.1 + 0.01j, 2 + 0.1j, -1 + 1j]:
            r = cw_cauchy(z, p, cfg)
            g = r.value
            assert abs(g - 1 / (z - cw_r(g, p.v, p.d))) <= cfg.tolerance
            assert r.residual <= cfg.tolerance and g.imag < 0

    def test_norm_bound(self, rng):
        p = cw_params(rng)
        for z in [0.5 + 0.05j, 3 + 0.2j]:
            assert abs(cw_cauchy(z, p).value) <= 1 / z.imag

    def test_iteration_cap(self, rng):
        with pytest.raises(NonConvergenceError) as info:
            cw_cauchy(1 + 0.1j, cw_params(rng), FixedPointConfig(max_iterations=2))
        assert info.value.iterations == 2 and info.value.residual > 0

    def test_requires_upper(self):
        with pytest.raises(ValueError):
            cw_cauchy(1.0, CwParams(np.zeros(2), 2))

    def test_permutation_invariance(self, rng):
        p = cw_params(rng)
        q = CwParams(rng.permutation(p.v), p.d)
        z = 1.3 + 0.05j
        assert abs(cw_cauchy(z, p).value - cw_cauchy(z, q).value) < 1e-10

    def test_undamped_agrees(self, rng):
        p = cw_params(rng, m=0.3)
        z = 0.2 + 0.5j
        a = cw_cauchy(z, p).value
        b = cw_cauchy(z, p, FixedPointConfig(damping=False)).value
        assert abs(a - b) < 1e-7


class TestEta:
    def test_examples(self):
        assert eta2((1j, 2j), 5, 5) == (2j, 1j)
        assert eta2((0, 1), 10, 5) == (2, 0)

    @given(upper, upper, st.integers(1, 5), st.integers(1, 5))
    def test_involution(self, b1, b2, k, d):
        p = k * d
        e = eta2(eta2((b1, b2), p, d), p, d)
        assert e[0] == pytest.approx(p / d * b1) and e[1] == pytest.approx(p / d * b2)


class TestGSigma:
    def test_noiseless(self):
        g = spn_g_sigma((1 + 1j, 2j), 0.0, 3, 3)
        assert g == pytest.approx((1 / (1 + 1j), 1 / 2j))

    @pytest.mark.parametrize("z", [0.5 + 0.1j, -1 + 0.3j, 2.5 + 0.05j])
    def test_semicircle(self, z):
        g = spn_g_sigma((z, z), 1.0, 10, 10, FixedPointConfig(tolerance=1e-12))
        assert g.b1 == pytest.approx(g.b2, abs=1e-10)
        assert g.b1 == pytest.approx(semicircle(z), abs=1e-9)

    @settings(max_examples=30)
    @given(upper, upper, st.floats(0, 1.2))
    def test_bound_and_sign(self, z1, z2, sigma):
        g = spn_g_sigma((z1, z2), sigma, 60, 50)
        assert g.b1.imag < 0 and g.b2.imag < 0
        assert g.norm() <= np.hypot(1 / z1.imag, 1 / z2.imag) + 1e-12


class TestGa:
    def test_zero_signal(self):
        b = (0.3 + 1j, -2 + 0.5j)
        assert spn_g_a(b, np.zeros(4), 6, 4) == pytest.approx((1 / b[0], 1 / b[1]))

    def test_unit(self):
        assert spn_g_a((1j, 1j), np.zeros(3), 3, 3) == pytest.approx((-1j, -1j))

    def test_arithmetic(self):
        assert spn_g_a((2j, 2j), np.array([1.0]), 1, 1) == pytest.approx((-0.4j, -0.4j))

    def test_singular(self):
        with pytest.raises(SingularDenominatorError):
            spn_g_a((1.0, 1.0), np.array([1.0]), 1, 1)


class TestH:
    @given(upper, upper)
    def test_zero_cases(self, b1, b2):
        assert h_a((b1, b2), np.zeros(3), 4, 3) == pytest.approx((0, 0), abs=1e-12)
        assert h_sigma((b1, b2), 0.0, 4, 3) == pytest.approx((0, 0), abs=1e-12)

    def test_semicircle_h(self):
        z = 0.7 + 0.2j
        h = h_sigma((z, z), 1.0, 8, 8, FixedPointConfig(tolerance=1e-12))
        assert h.b1 == pytest.approx(-semicircle(z), abs=1e-9)
        assert h.b1.imag > 0

    @settings(max_examples=30)
    @given(upper, upper)
    def test_maps_to_closed_upper(self, b1, b2):
        a = np.linspace(0.1, 1.1, 7)
        assert h_a((b1, b2), a, 9, 7).b1.imag >= -1e-12
        assert h_sigma((b1, b2), 0.5, 9, 7).b2.imag >= -1e-12


class TestSubordination:
    def test_no_signal(self):
        z = (0.4 + 0.3j, 1.1 + 0.2j)
        assert spn_subordination(z, np.zeros(5), 0.7, 5, 5).value == pytest.approx(z, abs=1e-12)

    def test_no_noise(self):
        z = (0.4 + 0.3j, 1.1 + 0.2j)
        a = np.array([0.2, 0.9, 0.5])
        want = spn_g_a(z, a, 4, 3).inv()
        assert spn_subordination(z, a, 0.0, 4, 3).value == pytest.approx(want, abs=1e-9)

    def test_fixed_point_property(self, rng):
        cfg = FixedPointConfig()
        for _ in range(10):
            p = spn_params(rng)
            w = complex(rng.uniform(0, 2), rng.uniform(0.05, 0.5))
            Z = D2Point(w, w)
            psi = spn_subordination(Z, p.a, p.sigma, p.p, p.d, cfg).value
            again = h_a(h_sigma(psi, p.sigma, p.p, p.d, FixedPointConfig(1e-13)) + Z, p.a, p.p, p.d) + Z
            assert (again - psi).norm() < 10 * cfg.tolerance
            assert psi.b1.imag > 0 and psi.b2.imag > 0


class TestSpnCauchy:
    def test_noiseless_closed_form(self):
        p = SpnParams(np.ones(10), 0.0, 10)
        assert spn_cauchy(2 + 1e-6j, p).value == pytest.approx(1.0, abs=1e-5)
        z = 0.3 + 0.2j
        a = np.linspace(-1, 1, 10)
        want = np.mean(1 / (z - a ** 2))
        assert spn_cauchy(z, SpnParams(a, 0.0, 12)).value == pytest.approx(want, abs=1e-10)

    def test_cross_oracle(self):
        spn = SpnParams(np.zeros(50), 1.0, 50)
        cw = CwParams(np.ones(50), 50)
        for x in np.linspace(-1, 5, 61):
            z = complex(x, 0.1)
            assert abs(spn_cauchy(z, spn).value - cw_cauchy(z, cw).value) < 1e-6

    def test_normalization(self, rng):
        y = 1e6
        assert abs(1j * y * spn_cauchy(1j * y, spn_params(rng)).value - 1) < 1e-4

    @pytest.mark.parametrize("p", [50, 100])
    def test_permutation_invariance(self, rng, p):
        q = spn_params(rng, p=p)
        r = SpnParams(rng.permutation(q.a), q.sigma, p)
        z = 0.8 + 0.05j
        assert abs(spn_cauchy(z, q).value - spn_cauchy(z, r).value) < 1e-10

    def test_sign_of_parameters_irrelevant(self, rng):
        q = spn_params(rng)
        r = SpnParams(np.abs(q.a), abs(q.sigma), q.p)
        assert abs(spn_cauchy(1 + 0.1j, q).value - spn_cauchy(1 + 0.1j, r).value) < 1e-9


class TestInvariants:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), upper, st.booleans())
    def test_herglotz_and_residual(self, seed, z, spn):
        rng = np.random.default_rng(seed)
        params = spn_params(rng) if spn else cw_params(rng)
        cfg = FixedPointConfig()
        r = cauchy_transform(params, z, cfg)
        assert isinstance(r, TransformResult)
        assert r.value.imag < 0
        assert r.residual <= cfg.tolerance

    @pytest.mark.parametrize("model", ["cw", "spn"])
    def test_warm_start_consistency(self, rng, model):
        params = spn_params(rng) if model == "spn" else cw_params(rng)
        cfg = FixedPointConfig()
        warm = FixedPointConfig(warm_start=WarmStart())
        for x in np.linspace(-0.5, 4, 30):
            z = complex(x, 0.1)
            cold = cauchy_transform(params, z, cfg).value
            hot = cauchy_transform(params, z, warm).value
            # the fixed point error is residual / (1 - contraction); allow the
            # amplification the contraction factor implies
            assert abs(cold - hot) < 1e-5

    def test_warm_start_saves_iterations(self, rng):
        params = spn_params(rng)
        xs = np.linspace(0, 3, 60)
        cold = sum(cauchy_transform(params, complex(x, 0.1)).total_iterations for x in xs)
        _, iters, _ = gamma_slice_grid(params, xs, 0.1)
        assert iters.sum() < cold

    def test_unknown_params(self):
        with pytest.raises(TypeError):
            cauchy_transform(object(), 1j)


class TestGammaSlice:
    def test_point_mass(self):
        assert gamma_slice(CwParams(np.zeros(3), 3), 0.0, 0.1) == pytest.approx(3.183099, abs=1e-6)

    def test_shifted_point_mass(self):
        p = SpnParams(np.ones(5), 0.0, 5)
        for x in [0.0, 1.0, 2.5]:
            want = (0.1 / np.pi) / ((x - 1) ** 2 + 0.01)
            assert gamma_slice(p, x, 0.1) == pytest.approx(want, rel=1e-8)

    @pytest.mark.parametrize("gamma", [0.1, 1.0])
    @pytest.mark.parametrize("model", ["cw", "spn"])
    def test_mass(self, rng, model, gamma):
        params = spn_params(rng, m=1.0) if model == "spn" else cw_params(rng)
        xs = np.linspace(-50, 50, 4001)
        vals, _, resid = gamma_slice_grid(params, xs, gamma)
        assert np.all(vals > 0)
        assert abs(np.trapezoid(vals, xs) - 1) < 0.05
        assert np.all(resid <= 1e-8)

    def test_gamma_positive(self):
        with pytest.raises(ValueError):
            gamma_slice(CwParams(np.zeros(2), 2), 0.0, 0.0)
