"""Prediction, delta-method uncertainty, posterior simulation, summary."""

import numpy as np
import pandas as pd
import pytest

from evsmooth import model
from evsmooth.families import gev_quantile, make_family
from evsmooth.fit import fit
from evsmooth.inference import (_quantile_gradient, linked_parameters,
                                predict, simulate, summarize)


class _Stub:
    """Carries just the family attribute the gradient helper reads."""

    def __init__(self, name):
        self.family = make_family(name)


@pytest.fixture(scope="module")
def gev_const():
    rng = np.random.default_rng(31)
    n = 800
    xi = 0.1
    u = rng.uniform(size=n)
    y = 4.0 + 1.5 * ((-np.log(u)) ** (-xi) - 1.0) / xi
    return fit(model.ModelSpec("gev", response="y", formulas=[[], [], []]),
               {"y": y})


@pytest.fixture(scope="module")
def gauss_smooth():
    rng = np.random.default_rng(32)
    n = 400
    x = rng.uniform(size=n)
    y = np.sin(2 * np.pi * x) + rng.normal(0, 0.3, n)
    spec = model.ModelSpec(
        "gauss", response="y",
        formulas=[[model.smooth("x", k=10)], []])
    return fit(spec, {"x": x, "y": y})


class TestQuantileGradientOracle:
    """Analytic quantile gradients against central differences."""

    def fd_check(self, family_name, eta, prob, **kw):
        m = _Stub(family_name)
        z, grad = _quantile_gradient(m, eta, prob, **kw)
        h = 1e-6
        for j in range(eta.shape[1]):
            ep = eta.copy()
            em = eta.copy()
            ep[:, j] += h
            em[:, j] -= h
            zp, _ = _quantile_gradient(m, ep, prob, **kw)
            zm, _ = _quantile_gradient(m, em, prob, **kw)
            fd = (zp - zm) / (2 * h)
            scale = np.maximum(1.0, np.abs(fd))
            assert np.max(np.abs(grad[:, j] - fd) / scale) < 1e-6, \
                f"{family_name} param {j}"

    def test_gev(self):
        rng = np.random.default_rng(1)
        eta = np.column_stack([rng.normal(0, 2, 40),
                               rng.normal(0, 0.4, 40),
                               rng.uniform(-0.3, 0.3, 40)])
        self.fd_check("gev", eta, 0.99)
        self.fd_check("gev", eta, 0.5)

    def test_gev_near_zero_shape(self):
        eta = np.array([[1.0, 0.2, 1e-8], [0.0, 0.0, 0.0],
                        [2.0, -0.1, -1e-8]])
        z, grad = _quantile_gradient(_Stub("gev"), eta, 0.99)
        lx = np.log(-np.log(0.99))
        psi = np.exp(eta[:, 1])
        np.testing.assert_allclose(z, eta[:, 0] - psi * lx, atol=1e-6)
        np.testing.assert_allclose(grad[:, 2], psi * lx ** 2 / 2,
                                   rtol=1e-5)

    def test_gpd(self):
        rng = np.random.default_rng(2)
        eta = np.column_stack([rng.normal(0, 0.5, 40),
                               rng.uniform(-0.3, 0.3, 40)])
        self.fd_check("gpd", eta, 0.99, m=365.25, zeta=0.05, theta=0.7)
        self.fd_check("gpd", eta, 0.9, m=12.0, zeta=0.4, theta=1.0)

    def test_gauss_and_exponential(self):
        rng = np.random.default_rng(3)
        eta2 = np.column_stack([rng.normal(0, 1, 30),
                                rng.normal(0, 0.5, 30)])
        self.fd_check("gauss", eta2, 0.975)
        self.fd_check("exponential", eta2[:, :1], 0.9)

    def test_gpd_subthreshold_request_errors(self):
        eta = np.array([[0.0, 0.1]])
        with pytest.raises(ValueError, match="below the threshold"):
            _quantile_gradient(_Stub("gpd"), eta, 0.5, m=1.0, zeta=0.01,
                               theta=1.0)


class TestPredict:
    def test_link_and_response_consistency(self, gauss_smooth):
        nd = {"x": np.linspace(0, 1, 7)}
        link = predict(gauss_smooth, nd, type="link")
        resp = predict(gauss_smooth, nd, type="response")
        np.testing.assert_allclose(resp["mean"], link["mean"])
        np.testing.assert_allclose(resp["sd"], np.exp(link["logsd"]))

    def test_intercept_only_link_se_is_sqrt_v_diagonal(self, gev_const):
        out = predict(gev_const, {"y": [0.0]}, type="link", se_fit=True)
        se = np.sqrt(np.diag(gev_const.V))
        np.testing.assert_allclose(
            out.iloc[0][["location_se", "logscale_se", "shape_se"]],
            se, rtol=1e-12)

    def test_quantile_matches_closed_form(self, gev_const):
        out = predict(gev_const, {"y": [0.0]}, type="quantile", prob=0.99)
        mu, b, xi = gev_const.beta
        expect = float(gev_quantile(0.99, mu, np.exp(b), xi))
        assert abs(out["quantile"].iloc[0] - expect) < 1e-12

    def test_response_se_scales_with_log_link(self, gev_const):
        out = predict(gev_const, {"y": [0.0]}, type="response",
                      se_fit=True)
        link = predict(gev_const, {"y": [0.0]}, type="link", se_fit=True)
        psi = float(out["scale"].iloc[0])
        np.testing.assert_allclose(out["scale_se"].iloc[0],
                                   psi * link["logscale_se"].iloc[0])

    def test_dataframe_input(self, gauss_smooth):
        nd = pd.DataFrame({"x": [0.2, 0.8]})
        out = predict(gauss_smooth, nd, type="response")
        assert len(out) == 2

    def test_errors(self, gev_const):
        with pytest.raises(ValueError, match="prob"):
            predict(gev_const, {"y": [0.0]}, type="quantile")
        with pytest.raises(ValueError, match="unknown prediction"):
            predict(gev_const, {"y": [0.0]}, type="wat")


class TestDeltaVersusSimulation:
    def test_link_se_agrees_with_posterior_sd(self, gauss_smooth):
        nd = {"x": np.linspace(0.05, 0.95, 9)}
        out = predict(gauss_smooth, nd, type="link", se_fit=True)
        sims = simulate(gauss_smooth, nd, nsim=10000, seed=5, type="link")
        sd = sims["mean"].std(axis=1, ddof=1)
        ratio = out["mean_se"].to_numpy() / sd
        assert np.all(np.abs(ratio - 1.0) < 0.1)

    def test_quantile_se_agrees_with_posterior_sd(self, gev_const):
        out = predict(gev_const, {"y": [0.0]}, type="quantile", prob=0.99,
                      se_fit=True)
        draws = simulate(gev_const, {"y": [0.0]}, nsim=10000, seed=6,
                         type="quantile", prob=0.99)
        sd = draws.std(axis=1, ddof=1)[0]
        assert abs(out["quantile_se"].iloc[0] / sd - 1.0) < 0.1


class TestSimulate:
    def test_reproducible_with_seed(self, gauss_smooth):
        nd = {"x": [0.3, 0.6]}
        a = simulate(gauss_smooth, nd, nsim=50, seed=11)
        b = simulate(gauss_smooth, nd, nsim=50, seed=11)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])
        c = simulate(gauss_smooth, nd, nsim=50, seed=12)
        assert not np.array_equal(a["mean"], c["mean"])

    def test_response_draws_respect_log_link(self, gev_const):
        out = simulate(gev_const, {"y": [0.0]}, nsim=200, seed=2,
                       type="response")
        assert np.all(out["scale"] > 0)
        assert set(out) == {"location", "scale", "shape"}

    def test_quantile_draw_shape(self, gev_const):
        out = simulate(gev_const, {"y": [0.0, 0.0]}, nsim=33, seed=3,
                       type="quantile", prob=0.95)
        assert out.shape == (2, 33)

    def test_draw_mean_near_estimate(self, gev_const):
        out = simulate(gev_const, {"y": [0.0]}, nsim=4000, seed=9,
                       type="link")
        mu_draws = out["location"][0]
        se = np.sqrt(gev_const.V[0, 0])
        assert abs(mu_draws.mean() - gev_const.beta[0]) < 4 * se

    def test_unknown_type(self, gev_const):
        with pytest.raises(ValueError):
            simulate(gev_const, {"y": [0.0]}, nsim=5, type="wat")


class TestSummarize:
    def test_tables_have_expected_rows(self, gauss_smooth):
        rep = summarize(gauss_smooth)
        assert len(rep.parametric) == 2      # two intercepts
        assert len(rep.smooths) == 1
        srow = rep.smooths.iloc[0]
        assert srow["param"] == "mean"
        assert srow["term"] == "s(x)"
        assert 0.0 <= srow["p_value"] <= 1.0
        assert srow["edf"] <= srow["max_df"]

    def test_strong_smooth_is_significant(self, gauss_smooth):
        rep = summarize(gauss_smooth)
        assert rep.smooths.iloc[0]["chi_sq"] > 50.0
        assert rep.smooths.iloc[0]["p_value"] < 1e-6

    def test_parametric_fields(self, gev_const):
        rep = summarize(gev_const)
        assert len(rep.parametric) == 3
        assert np.all(rep.parametric["se"] > 0)
        text = str(rep)
        assert "approximate Wald" in text or len(rep.smooths) == 0
        assert "log-likelihood" in text

    def test_total_edf_consistency(self, gauss_smooth):
        rep = summarize(gauss_smooth)
        assert abs(rep.edf - gauss_smooth.edf) < 1e-12


def test_linked_parameters_helper(gev_const):
    eta = linked_parameters(gev_const, {"y": [0.0, 0.0]})
    assert eta.shape == (2, 3)
    np.testing.assert_allclose(eta[0], gev_const.beta)
