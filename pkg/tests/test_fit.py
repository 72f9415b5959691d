"""Fitting engine checks against closed-form and grid-search oracles.

The Gaussian family admits a closed-form penalized solution and an
explicitly codable restricted likelihood, so it anchors the Newton
solver and the LAML computation.  Smoothing parameter selection is
compared against a brute-force grid search.
"""

import numpy as np
import pytest
from scipy import linalg
from scipy.stats import norm

from evsmooth.families import gev_quantile
from evsmooth.fit import FitError, fd_gradient, fit
from evsmooth.model import ModelSpec, linear, smooth


def sim_gauss_smooth(seed=5, n=400, sd=0.3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, n)
    mu = np.sin(2.0 * np.pi * x)
    y = mu + rng.normal(0.0, sd, n)
    return {"x": x, "y": y}, mu


class TestGaussianOracle:
    rho_fixed = 1.3

    def fit_fixed(self):
        data, mu = sim_gauss_smooth()
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, data, outer="fixed", rho0=self.rho_fixed)
        return m, data

    def test_beta_matches_generalized_ridge(self):
        m, data = self.fit_fixed()
        X = m.designs[0].design(data)
        P = X.shape[1]
        S = np.zeros((P, P))
        t = m.designs[0].terms[1]
        S[t.cols, t.cols] = np.exp(self.rho_fixed) * t.penalties[0]
        sd = np.exp(m.beta[-1])
        beta_mean = m.beta[:P]
        # closed-form generalized ridge at the fitted error variance
        ridge = linalg.solve(X.T @ X / sd ** 2 + S,
                             X.T @ np.asarray(data["y"]) / sd ** 2)
        np.testing.assert_allclose(beta_mean, ridge, atol=1e-6)

    def test_laml_matches_independent_computation(self):
        m, data = self.fit_fixed()
        y = np.asarray(data["y"])
        X = m.designs[0].design(data)
        n, P = X.shape
        t = m.designs[0].terms[1]
        lam = np.exp(self.rho_fixed)
        S0 = t.penalties[0]
        S = np.zeros((P, P))
        S[t.cols, t.cols] = lam * S0

        beta_mean = m.beta[:P]
        s_hat = m.beta[-1]
        sd = np.exp(s_hat)
        resid = y - X @ beta_mean
        ll = float(np.sum(norm.logpdf(y, X @ beta_mean, sd)))
        lpen = ll - 0.5 * beta_mean @ S @ beta_mean

        # log of the product of positive eigenvalues of the penalty
        w = np.linalg.eigvalsh(S0)
        pos = w[w > 1e-10 * w.max()]
        ldS = len(pos) * self.rho_fixed + float(np.sum(np.log(pos)))

        # full penalized Hessian including the log-sd row and column
        z = resid / sd
        Hp = np.zeros((P + 1, P + 1))
        Hp[:P, :P] = X.T @ X / sd ** 2 + S
        cross = X.T @ (2.0 * z / sd)
        Hp[:P, -1] = cross
        Hp[-1, :P] = cross
        Hp[-1, -1] = float(np.sum(2.0 * z ** 2))
        sign, ldH = np.linalg.slogdet(Hp)
        assert sign > 0
        laml_oracle = -(lpen + 0.5 * ldS - 0.5 * ldH)
        np.testing.assert_allclose(m.meta["laml"], laml_oracle, atol=1e-6)

    def test_reml_close_to_grid_search_oracle(self):
        data, mu = sim_gauss_smooth(seed=7, n=500)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, data)
        X = m.designs[0].design(data)

        def rmse_at(model):
            f = X @ model.beta[:X.shape[1]]
            return float(np.sqrt(np.mean((f - mu) ** 2)))

        best = np.inf
        for rho in np.linspace(-9.0, 7.0, 30):
            mg = fit(spec, data, outer="fixed", rho0=float(rho))
            best = min(best, rmse_at(mg))
        assert rmse_at(m) <= 1.1 * best


class TestRemlStationarity:
    def test_gradient_small_at_optimum(self):
        data, _ = sim_gauss_smooth(seed=9)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, data)
        g = fd_gradient(m.reml_objective(), m.rho)
        assert np.max(np.abs(g)) < 1e-3

    def test_pure_noise_edf_small(self):
        rng = np.random.default_rng(15)
        data = {"x": rng.uniform(0.0, 1.0, 300),
                "y": rng.normal(0.0, 1.0, 300)}
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, data)
        edf_smooth = [e for p, l, e, _, sm in m.edf_terms if sm][0]
        assert edf_smooth < 2.5

    def test_loaded_model_has_no_reml_objective(self):
        data, _ = sim_gauss_smooth(seed=9, n=120)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=8)]])
        m = fit(spec, data)
        m._fitstate = None
        with pytest.raises(RuntimeError):
            m.reml_objective()


class TestGevRecovery:
    def test_smooth_location_recovered(self):
        rng = np.random.default_rng(42)
        n = 2000
        x = rng.uniform(0.0, 1.0, n)
        mu = 2.0 + np.sin(2.0 * np.pi * x)
        y = gev_quantile(rng.uniform(size=n), mu, 1.0, 0.1)
        spec = ModelSpec(family="gev", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, {"x": x, "y": y})
        grid = {"x": np.linspace(0.0, 1.0, 100)}
        mu_hat = m.designs[0].design(grid) @ m.beta[:m.designs[0].ncol]
        mu_true = 2.0 + np.sin(2.0 * np.pi * grid["x"])
        rmse = float(np.sqrt(np.mean((mu_hat - mu_true) ** 2)))
        assert rmse < 0.15
        xi_hat = float(m.beta[-1])
        assert 0.0 <= xi_hat <= 0.2

    def test_dimension_reduction_of_smooth(self):
        # a cr(k=10) smooth contributes 9 columns after the sum-to-zero
        # constraint, plus the intercept
        rng = np.random.default_rng(43)
        data = {"x": rng.uniform(size=300),
                "y": rng.gumbel(2.0, 1.0, size=300)}
        spec = ModelSpec(family="gev", response="y",
                         formulas=[[smooth("x", k=10)]])
        m = fit(spec, data)
        assert m.designs[0].ncol == 10
        assert m.designs[0].terms[1].ncol == 9


class TestAldQuantileRecovery:
    def test_intercept_only_tau_090(self):
        rng = np.random.default_rng(90)
        y = rng.normal(0.0, 1.0, 5000)
        spec = ModelSpec(family="ald", response="y", tau=0.9)
        m = fit(spec, {"y": y})
        u_hat = float(m.beta[0])
        assert abs(u_hat - 1.2816) < 0.06

    def test_back_transform_consistency(self):
        # fitting shifted/scaled data gives correspondingly
        # shifted/scaled location estimates
        rng = np.random.default_rng(91)
        y = rng.normal(0.0, 1.0, 3000)
        spec = ModelSpec(family="ald", response="y", tau=0.75)
        m1 = fit(spec, {"y": y})
        m2 = fit(spec, {"y": 10.0 + 5.0 * y})
        assert abs((10.0 + 5.0 * m1.beta[0]) - m2.beta[0]) < 0.05
        se1 = np.sqrt(m1.V[0, 0])
        se2 = np.sqrt(m2.V[0, 0])
        np.testing.assert_allclose(se2, 5.0 * se1, rtol=0.05)


class TestOtherFamilies:
    def test_gpd_fit(self):
        rng = np.random.default_rng(61)
        y = rng.pareto(5.0, size=1500) * 2.0 + 1e-9
        spec = ModelSpec(family="gpd", response="y")
        m = fit(spec, {"y": y})
        psi, xi = np.exp(m.beta[0]), m.beta[1]
        assert 0.0 < psi < 2.0
        assert -0.1 < xi < 0.5

    def test_exponential_fit(self):
        rng = np.random.default_rng(62)
        y = rng.exponential(3.0, size=2000)
        spec = ModelSpec(family="exponential", response="y")
        m = fit(spec, {"y": y})
        np.testing.assert_allclose(np.exp(m.beta[0]), np.mean(y), rtol=1e-4)

    def test_pp_fit_matches_gev_scale(self):
        # with ny = 1 the fitted location/scale describe the per-group
        # maximum; for 80 gumbel(10, 2) draws that maximum is centered
        # at 10 + 2 log 80
        rng = np.random.default_rng(63)
        ngroups, per = 40, 80
        y = rng.gumbel(10.0, 2.0, size=ngroups * per)
        ids = np.repeat(np.arange(ngroups), per)
        spec = ModelSpec(family="pp", response="y",
                         pp_args={"group": "gid", "r": 10, "ny": 1.0})
        m = fit(spec, {"y": y, "gid": ids})
        assert m.meta["pp_groups"] == ngroups
        mu, psi, xi = m.beta[0], np.exp(m.beta[1]), m.beta[2]
        assert abs(xi) < 0.25
        assert abs(mu - (10.0 + 2.0 * np.log(80.0))) < 1.0
        assert 1.4 < psi < 2.8

    def test_pp_rejects_varying_covariate(self):
        rng = np.random.default_rng(64)
        data = {"y": rng.gumbel(0.0, 1.0, 60),
                "gid": np.repeat(np.arange(6), 10),
                "z": rng.normal(size=60)}
        spec = ModelSpec(family="pp", response="y",
                         formulas=[[linear("z")]],
                         pp_args={"group": "gid", "r": 5, "ny": 1.0})
        with pytest.raises(ValueError, match="varies within"):
            fit(spec, data)

    def test_censored_gauss_near_exact_fit(self):
        # narrow intervals reproduce the uncensored estimates
        rng = np.random.default_rng(65)
        y = rng.normal(3.0, 2.0, 1500)
        half = 0.005
        spec_c = ModelSpec(family="gauss", censor=("lo", "hi"))
        m_c = fit(spec_c, {"lo": y - half, "hi": y + half})
        spec_e = ModelSpec(family="gauss", response="y")
        m_e = fit(spec_e, {"y": y})
        np.testing.assert_allclose(m_c.beta, m_e.beta, atol=1e-3)

    def test_censored_gev_runs(self):
        rng = np.random.default_rng(66)
        y = np.round(rng.gumbel(20.0, 3.0, 800), 1)
        spec = ModelSpec(family="gev", censor=("lo", "hi"))
        m = fit(spec, {"lo": y - 0.05, "hi": y + 0.05})
        assert abs(m.beta[0] - 20.0) < 0.5
        assert abs(np.exp(m.beta[1]) - 3.0) < 0.3


class TestFitOptions:
    def test_maxdata_subsamples(self):
        rng = np.random.default_rng(71)
        data = {"y": rng.normal(size=1000)}
        spec = ModelSpec(family="gauss", response="y")
        m = fit(spec, data, maxdata=200, seed=3)
        assert m.meta["n"] == 200
        m2 = fit(spec, data, maxdata=200, seed=3)
        np.testing.assert_array_equal(m.beta, m2.beta)

    def test_missing_rows_dropped(self):
        rng = np.random.default_rng(72)
        y = rng.normal(size=100)
        y[::10] = np.nan
        spec = ModelSpec(family="gauss", response="y")
        m = fit(spec, {"y": y})
        assert m.meta["n"] == 90

    def test_inits_override(self):
        rng = np.random.default_rng(73)
        data = {"y": rng.gumbel(5.0, 1.0, 500)}
        spec = ModelSpec(family="gev", response="y")
        m = fit(spec, data, inits=[5.0, 0.0, 0.1])
        assert abs(m.beta[0] - 5.0) < 0.5

    def test_rho0_vector_and_validation(self):
        data, _ = sim_gauss_smooth(seed=74, n=200)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=8)]])
        m = fit(spec, data, rho0=[2.0])
        assert np.isfinite(m.meta["laml"])
        with pytest.raises(ValueError):
            fit(spec, data, rho0=[1.0, 2.0])

    def test_unknown_outer(self):
        data, _ = sim_gauss_smooth(seed=75, n=150)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=8)]])
        with pytest.raises(ValueError):
            fit(spec, data, outer="gradient-descent")

    def test_missing_column(self):
        spec = ModelSpec(family="gauss", response="y")
        with pytest.raises(KeyError):
            fit(spec, {"z": np.arange(10.0)})

    def test_newton_outer_agrees_with_bfgs(self):
        data, _ = sim_gauss_smooth(seed=76, n=300)
        spec = ModelSpec(family="gauss", response="y",
                         formulas=[[smooth("x", k=8)]])
        m1 = fit(spec, data, outer="bfgs")
        m2 = fit(spec, data, outer="newton")
        assert abs(m1.rho[0] - m2.rho[0]) < 0.05
        np.testing.assert_allclose(m1.meta["laml"], m2.meta["laml"],
                                   atol=1e-4)

    def test_positivity_requirement(self):
        spec = ModelSpec(family="gpd", response="y")
        with pytest.raises(ValueError, match="positive"):
            fit(spec, {"y": np.array([1.0, -0.5, 2.0])})
