import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonkit import hom, models
from photonkit.estimators import (HOMRegressor, LorentzianRegressor, SaturationRegressor,
                                  TwoLevelG2Regressor, gaussian_2d, gaussian_2d_jacobian)
from photonkit.fitter import (FitResult, ModelSpec, SingularMatrixError, fit_nlls,
                             finite_difference_jacobian, format_fit_result, parse_fit_result)
from photonkit.montecarlo import stage_rng

LINE = ModelSpec(lambda p, x: p[0] * x + p[1], ("slope", "intercept"))
QUAD = ModelSpec(lambda p, x: p[0] * x**2 + p[1] * x + p[2], ("a", "b", "c"))


class TestEngineExamples:
    def test_exact_line(self):
        x = np.linspace(-3, 5, 20)
        r = fit_nlls(LINE, x, 2 * x + 1, init=[0.0, 0.0])
        np.testing.assert_allclose(r.params, [2, 1], atol=1e-10)
        assert r.chi2_reduced == pytest.approx(0.0, abs=1e-20)
        assert r.converged

    def test_quadratic_interpolation(self):
        x = np.array([-1.0, 0.5, 2.0])
        y = np.array([3.0, -1.0, 4.0])
        r = fit_nlls(QUAD, x, y, init=[0, 0, 0])
        np.testing.assert_allclose(QUAD.func(r.params, x), y, atol=1e-10)
        assert r.chi2 == pytest.approx(0.0, abs=1e-18)
        assert r.chi2_reduced == pytest.approx(0.0, abs=1e-18)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_nlls(QUAD, [0.0, 1.0], [0.0, 1.0], init=[0, 0, 0])

    def test_nonpositive_weights(self):
        with pytest.raises(ValueError):
            fit_nlls(LINE, [0.0, 1.0, 2.0], [0.0, 1.0, 2.0], weights=[1, 0, 1], init=[0, 0])

    def test_non_convergence_returns_best_point(self):
        x = np.linspace(0, 10, 50)
        y = models.saturation(x, 0.0, 1e5, 2.0)
        spec = SaturationRegressor()._spec()
        r = fit_nlls(spec, x, y, init=[0.0, 1.0, 50.0], max_iter=2)
        assert not r.converged
        assert r.iterations == 2
        assert r.history[-1] < r.history[0]

    def test_singular_normal_matrix(self):
        spec = ModelSpec(lambda p, x: (p[0] + p[1]) * x, ("a", "b"))
        x = np.linspace(0, 1, 10)
        with pytest.raises(SingularMatrixError):
            fit_nlls(spec, x, 3 * x + 0.01 * np.sin(7 * x), init=[1.0, 1.0])

    def test_fixed_parameter(self):
        x = np.linspace(0, 1, 10)
        r = fit_nlls(LINE, x, 2 * x + 1, init=[0.0, 5.0], fixed={"intercept": 1.0})
        assert r["intercept"] == 1.0
        assert r.error("intercept") == 0.0
        assert r["slope"] == pytest.approx(2.0, abs=1e-10)

    def test_bounds_are_respected(self):
        spec = ModelSpec(LINE.func, LINE.names, lower=[-np.inf, 0.0], upper=[np.inf, np.inf])
        x = np.linspace(0, 1, 10)
        r = fit_nlls(spec, x, x - 1.0, init=[0.0, 1.0])
        assert r["intercept"] >= 0.0

    def test_bound_ordering(self):
        with pytest.raises(ValueError):
            ModelSpec(LINE.func, LINE.names, lower=[1, 1], upper=[0, 0])

    def test_covariance_properties(self):
        rng = stage_rng(0, 900)
        x = np.linspace(0, 10, 40)
        y = models.saturation(x, 10.0, 1e3, 2.0) + rng.normal(0, 5, x.size)
        r = SaturationRegressor().fit(x, y).result_
        assert np.all(r.sigma >= 0)
        np.testing.assert_allclose(r.covariance, r.covariance.T, atol=0)
        assert np.min(np.linalg.eigvalsh(r.covariance)) >= -1e-12 * np.max(np.abs(r.covariance))

    def test_converged_implies_small_gradient(self):
        rng = stage_rng(1, 900)
        x = np.linspace(-1, 1, 60)
        y = models.lorentzian(x, 0.1, 0.3, 50.0, 2.0) + rng.normal(0, 1, x.size)
        est = LorentzianRegressor().fit(x, y)
        r = est.result_
        assert r.converged
        spec = est._spec()
        J = spec.jac(r.params, x)
        res = y - spec.func(r.params, x)
        cos = np.abs(J.T @ res) / (np.linalg.norm(J, axis=0) * np.linalg.norm(res))
        assert np.max(cos) < 1e-6


class TestGradientChecks:
    """Analytic Jacobians against central differences at random interior points."""

    N = 25

    def _check(self, f, jac, p, x, step):
        fd = finite_difference_jacobian(f, p, x, step)
        an = jac(p, x)
        scale = np.maximum(np.max(np.abs(an), axis=0), 1e-300)
        assert np.max(np.abs(fd - an) / scale) < 1e-6

    def test_two_level(self):
        rng = stage_rng(2, 900)
        x = np.linspace(-20, 20, 201) + 0.05
        for _ in range(self.N):
            p = np.array([rng.uniform(0, 0.9), rng.uniform(0.1, 3)])
            self._check(lambda q, t: models.g2_two_level(t, *q),
                        lambda q, t: models.g2_two_level_jacobian(t, *q), p, x, 1e-6)

    def test_saturation(self):
        rng = stage_rng(3, 900)
        x = np.linspace(0, 10, 50)
        for _ in range(self.N):
            p = np.array([rng.uniform(0, 1e3), rng.uniform(1e4, 1e6), rng.uniform(0.2, 3)])
            self._check(lambda q, t: models.saturation(t, *q),
                        lambda q, t: models.saturation_jacobian(t, *q), p, x,
                        1e-6 * np.abs(p) + 1e-9)

    def test_lorentzian(self):
        rng = stage_rng(4, 900)
        for _ in range(self.N):
            c, w = rng.uniform(1550, 1560), rng.uniform(0.02, 0.2)
            p = np.array([c, w, rng.uniform(10, 1e4), rng.uniform(0, 100)])
            x = np.linspace(c - 5 * w, c + 5 * w, 80)
            # the centre needs an absolute step far below the line width
            self._check(lambda q, t: models.lorentzian(t, *q),
                        lambda q, t: models.lorentzian_jacobian(t, *q), p, x,
                        np.array([1e-5 * w, 1e-5 * w, 1e-6 * p[2], 1e-6]))

    def test_hom_cross_and_co(self):
        rng = stage_rng(5, 900)
        x = np.linspace(-10, 10, 201) + 0.05
        for _ in range(self.N):
            r1, r2 = rng.uniform(0.2, 0.8, 2)
            s = hom.SplitterPair(r1, 1 - r1, r2, 1 - r2)
            p = np.array([rng.uniform(0, 0.5), rng.uniform(0.2, 2), rng.uniform(0.1, 0.95),
                          rng.uniform(200, 900)])
            self._check(lambda q, t: hom.g2_cross(t, q[0], q[1], s, 4.36),
                        lambda q, t: hom.g2_cross_jacobian(t, q[0], q[1], s, 4.36),
                        p[:2], x, 1e-6)
            self._check(lambda q, t: hom.g2_co(t, *q, s, 4.36),
                        lambda q, t: hom.g2_co_jacobian(t, *q, s, 4.36), p, x,
                        np.array([1e-6, 1e-6, 1e-6, 1e-3]))

    def test_gaussian_2d(self):
        rng = stage_rng(6, 900)
        g = np.linspace(-4, 4, 21)
        X = np.column_stack([a.ravel() for a in np.meshgrid(g, g)])
        for _ in range(self.N):
            p = np.array([rng.uniform(0.5, 2), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          rng.uniform(0.8, 2), rng.uniform(0.8, 2)])
            self._check(gaussian_2d, gaussian_2d_jacobian, p, X, 1e-6)

    def test_bin_averaged_estimator_models(self):
        rng = stage_rng(7, 900)
        x = np.linspace(-20, 20, 101) + 0.05
        for _ in range(self.N):
            spec = TwoLevelG2Regressor(bin_width=0.1)._spec()
            p = np.array([rng.uniform(0, 0.9), rng.uniform(0.1, 3)])
            self._check(spec.func, spec.jac, p, x, 1e-6)
            hspec = HOMRegressor(bin_width=0.1)._spec()
            X = np.column_stack([np.r_[x, x], np.r_[np.zeros_like(x), np.ones_like(x)]])
            q = np.array([rng.uniform(0, 0.5), rng.uniform(0.2, 2), rng.uniform(0.1, 0.95),
                          rng.uniform(200, 900)])
            self._check(hspec.func, hspec.jac, q, X, np.array([1e-6, 1e-6, 1e-6, 1e-3]))


def _monotone(history):
    return all(b <= a for a, b in zip(history, history[1:]))


class TestDescentAndInvariance:
    def test_random_fits_descend(self):
        rng = stage_rng(8, 900)
        x = np.linspace(-15, 15, 61)
        spec = TwoLevelG2Regressor()._spec()
        for _ in range(250):
            p = [rng.uniform(0, 0.8), rng.uniform(0.2, 2)]
            y = models.g2_two_level(x, *p) + rng.normal(0, 0.03, x.size)
            r = fit_nlls(spec, x, y, init=[rng.uniform(0, 0.9), rng.uniform(0.05, 5)])
            assert _monotone(r.history)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 1e4), st.integers(0, 2**31))
    def test_scale_invariance(self, scale, seed):
        rng = stage_rng(seed, 901)
        x = np.linspace(0, 8, 30)
        y = models.saturation(x, 50.0, 1e4, 1.5) * (1 + 0.02 * rng.standard_normal(x.size))
        w = 1.0 / (0.02 * y) ** 2
        spec = ModelSpec(lambda p, t: models.saturation(t, *p), ("i0", "i_sat", "p_sat"),
                         jac=lambda p, t: models.saturation_jacobian(t, *p))
        init = [0.0, 8e3, 1.0]
        a = fit_nlls(spec, x, y, w, init)
        scaled = ModelSpec(lambda p, t: scale * models.saturation(t, *p), spec.names,
                           jac=lambda p, t: scale * models.saturation_jacobian(t, *p))
        b = fit_nlls(scaled, x, scale * y, w / scale**2, init)
        np.testing.assert_allclose(b.params, a.params, rtol=1e-8)


class TestCoverage:
    def test_noisy_g2_coverage(self):
        """500 Poisson resamples of a g2 histogram; each parameter's 3 sigma interval
        holds the truth in >= 99% of trials."""
        rng = stage_rng(9, 900)
        truth = np.array([0.05, 0.8])
        x = np.arange(-200, 200) * 0.1 + 0.05
        est = TwoLevelG2Regressor(bin_width=0.1)
        expected_counts = 400 * est._spec().func(truth, x)
        hits = np.zeros(2, int)
        for _ in range(500):
            c = rng.poisson(expected_counts)
            y = c / 400
            w = 400**2 / np.maximum(c, 1)
            r = est.fit(x, y, sample_weight=w).result_
            hits += np.abs(r.params - truth) <= 3 * r.sigma
        assert np.all(hits >= 495), hits


class TestSerialization:
    def test_round_trip(self):
        x = np.linspace(0, 10, 30)
        r = SaturationRegressor().fit(x, models.saturation(x, 1.0, 1e3, 2.0)
                                      + np.sin(x)).result_
        r.extras = {"note": 0.25}
        back, name = parse_fit_result(format_fit_result(r, "saturation"))
        assert name == "saturation"
        assert back.names == r.names
        np.testing.assert_array_equal(back.params, r.params)
        np.testing.assert_array_equal(back.sigma, r.sigma)
        np.testing.assert_array_equal(back.covariance, r.covariance)
        assert back.chi2_reduced == r.chi2_reduced
        assert back.converged == r.converged
        assert back.extras == {"note": 0.25}

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_fit_result("params = a\na = 1.0\n")
        with pytest.raises(ValueError):
            parse_fit_result("garbage line\n")

    def test_result_accessors(self):
        r = FitResult(("a", "b"), np.array([1.0, 2.0]), np.array([0.1, 0.2]), np.eye(2),
                      1.0, 3, True)
        assert r["b"] == 2.0 and r.error("a") == 0.1
        assert r.as_dict() == {"a": 1.0, "b": 2.0}
