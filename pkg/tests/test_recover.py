import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cnlfit.metrics import v_cw, v_spn, validation_loss
from cnlfit.optim import RunConfig
from cnlfit.recover import (
    RankResult,
    baseline_rank,
    count_above,
    determination_gap,
    random_params,
    recover_cell,
    recover_rank,
)
from cnlfit.spectra import CwParams, SpectrumSample, SpnParams, make_rng, sample_true_spn_experiment

vecs = arrays(np.float64, 6, elements=st.floats(-3, 3))


class TestBaseline:
    def test_example(self):
        assert baseline_rank(np.array([0.05, 0.2, 0.3]), 0.1) == 2

    def test_extremes(self):
        lam = np.array([0.2, 0.3, 0.4])
        assert baseline_rank(lam, 1.0) == 0
        assert baseline_rank(lam, 0.1) == 3

    def test_strict(self):
        assert baseline_rank(np.array([0.1]), 0.1) == 0

    @given(arrays(np.float64, 10, elements=st.floats(0, 2)), st.floats(0.01, 1), st.floats(0.01, 1))
    def test_monotone(self, lam, d1, d2):
        lo, hi = sorted((d1, d2))
        assert baseline_rank(lam, hi) <= baseline_rank(lam, lo)

    def test_delta_positive(self):
        with pytest.raises(ValueError):
            baseline_rank(np.ones(2), 0)


class TestValidationLosses:
    def test_sorting(self):
        assert v_cw([1, 0], [0, 1]) == 0

    def test_sigma_offset(self):
        a = np.array([0.2, 0.5])
        assert v_spn((a, 0.15), (a, 0.1)) == pytest.approx(0.05)

    def test_shift(self):
        b = np.linspace(0, 1, 9)
        assert v_cw(b + 0.3, b) == pytest.approx(0.3 * 3)

    @given(vecs, vecs, vecs)
    def test_metric(self, x, y, z):
        assert v_cw(x, x) == 0
        assert v_cw(x, z) <= v_cw(x, y) + v_cw(y, z) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            v_cw([1, 2], [1])

    def test_dispatch(self):
        assert validation_loss(CwParams(np.zeros(2), 2), CwParams(np.ones(2), 2)) == pytest.approx(np.sqrt(2))
        with pytest.raises(TypeError):
            validation_loss(object(), None)


class TestRecoverRank:
    def test_all_zero_is_rank_zero(self):
        assert count_above(np.zeros(5), 1e-3) == 0
        assert count_above(np.array([-0.5, 0.0, 2e-3]), 1e-3) == 2

    def test_requires_penalty(self):
        s = SpectrumSample(np.zeros(3), 3, 3)
        with pytest.raises(ValueError, match="xi"):
            recover_rank(s, RunConfig(xi=0))

    def test_order_invariance(self):
        _, s = sample_true_spn_experiment(10, 10, 3, 0.5, 0.1, seed=0)
        shuffled = SpectrumSample(s.eigenvalues, 10, 10)
        shuffled.eigenvalues = s.eigenvalues[::-1].copy()  # bypass the constructor's sort
        cfg = RunConfig(n_iterations=300, xi=1e-3, seed=0)
        a = recover_rank(s, cfg)
        b = recover_rank(shuffled, cfg)
        np.testing.assert_array_equal(a.a_hat, b.a_hat)
        assert isinstance(a, RankResult) and 0 <= a.estimated_rank <= 10

    def test_threshold_knob(self):
        _, s = sample_true_spn_experiment(10, 10, 3, 0.5, 0.1, seed=0)
        r = recover_rank(s, RunConfig(n_iterations=200, xi=1e-3), threshold=10.0)
        assert r.estimated_rank == 0 and r.threshold == 10.0

    def test_small_cell(self):
        row = recover_cell(20, 20, 4, 0.5, 0.1, seed=1, cfg=RunConfig(n_iterations=8000, xi=1e-3))
        assert set(row) == {"d_true", "lambda_min", "seed", "estimated_rank", "baseline_rank", "v_spn",
                            "runtime_seconds"}
        assert abs(row["estimated_rank"] - 4) <= 2
        assert row["runtime_seconds"] > 0


class TestGap:
    def test_noiseless_cw(self):
        th = CwParams(np.zeros(10), 10)
        assert abs(determination_gap(th, th, 0.1, seed=0).gap) < 1e-3

    def test_permutation_invariant(self):
        rng = make_rng(3, 5)
        th0 = random_params("cw", 12, 12, 1.0, rng)
        th = random_params("cw", 12, 12, 1.0, rng)
        perm = CwParams(th.v[::-1].copy(), 12)
        a = determination_gap(th0, th, 0.1, seed=3, n=801)
        b = determination_gap(th0, perm, 0.1, seed=3, n=801)
        assert a.gap == pytest.approx(b.gap, abs=1e-9)

    def test_report_fields(self):
        th = SpnParams(np.linspace(0, 1, 8), 0.2, 8)
        rep = determination_gap(th, th, 0.1, seed=1, n=801)
        assert rep.d == 8 and rep.gamma == 0.1
        assert rep.gap == pytest.approx(rep.empirical - rep.deterministic)
        assert all(np.isfinite([rep.empirical, rep.deterministic, rep.quadrature_bound]))

    def test_random_params(self):
        rng = make_rng(0, 5)
        s = random_params("spn", 7, 5, 1.2, rng)
        assert s.d == 5 and s.p == 7 and np.all((s.a >= 0) & (s.a <= 1.2))
        with pytest.raises(ValueError):
            random_params("nope", 1, 1, 1.0, rng)
