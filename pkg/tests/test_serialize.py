"""Model save/load: JSON round trips must preserve state bit for bit."""

import json

import numpy as np
import pytest

from evsmooth import model
from evsmooth.fit import fit
from evsmooth.serialize import load_model, save_model


@pytest.fixture(scope="module")
def smooth_model():
    rng = np.random.default_rng(41)
    n = 300
    x = rng.uniform(size=n)
    y = np.sin(2 * np.pi * x) + rng.normal(0, 0.3, n)
    spec = model.ModelSpec("gauss", response="y",
                           formulas=[[model.smooth("x", k=8)], []])
    return fit(spec, {"x": x, "y": y})


def test_round_trip_is_bit_exact(tmp_path, smooth_model):
    p = tmp_path / "m.json"
    save_model(smooth_model, p)
    loaded = load_model(p)
    np.testing.assert_array_equal(loaded.beta, smooth_model.beta)
    np.testing.assert_array_equal(loaded.V, smooth_model.V)
    np.testing.assert_array_equal(loaded.H, smooth_model.H)
    np.testing.assert_array_equal(loaded.rho, smooth_model.rho)
    assert loaded.edf_terms == smooth_model.edf_terms
    assert loaded.meta["loglik"] == smooth_model.meta["loglik"]


def test_second_save_identical_bytes(tmp_path, smooth_model):
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_model(smooth_model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_predictions_survive_round_trip(tmp_path, smooth_model):
    p = tmp_path / "m.json"
    save_model(smooth_model, p)
    loaded = load_model(p)
    nd = {"x": np.linspace(0.05, 0.95, 11)}
    a = smooth_model.predict(nd, type="response", se_fit=True)
    b = loaded.predict(nd, type="response", se_fit=True)
    for col in a.columns:
        np.testing.assert_array_equal(a[col].to_numpy(),
                                      b[col].to_numpy())


def test_simulate_survives_round_trip(tmp_path, smooth_model):
    p = tmp_path / "m.json"
    save_model(smooth_model, p)
    loaded = load_model(p)
    nd = {"x": [0.25, 0.75]}
    a = smooth_model.simulate(nd, nsim=20, seed=7)
    b = loaded.simulate(nd, nsim=20, seed=7)
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_loaded_model_has_no_fitting_workspace(tmp_path, smooth_model):
    p = tmp_path / "m.json"
    save_model(smooth_model, p)
    loaded = load_model(p)
    with pytest.raises(RuntimeError, match="freshly fitted"):
        loaded.reml_objective()


def test_gev_tensor_free_round_trip(tmp_path):
    rng = np.random.default_rng(42)
    n = 500
    x = rng.uniform(size=n)
    u = rng.uniform(size=n)
    y = (2.0 + np.sin(2 * np.pi * x)
         + 1.0 * ((-np.log(u)) ** (-0.1) - 1.0) / 0.1)
    spec = model.ModelSpec(
        "gev", response="y",
        formulas=[[model.smooth("x", k=8)], [], []])
    m = fit(spec, {"x": x, "y": y})
    p = tmp_path / "gev.json"
    save_model(m, p)
    loaded = load_model(p)
    nd = {"x": np.linspace(0.1, 0.9, 5)}
    np.testing.assert_array_equal(
        m.predict(nd, type="quantile", prob=0.99)["quantile"].to_numpy(),
        loaded.predict(nd, type="quantile", prob=0.99)
        ["quantile"].to_numpy())


def test_ald_round_trip_keeps_tau(tmp_path):
    rng = np.random.default_rng(43)
    y = rng.normal(size=400)
    spec = model.ModelSpec("ald", response="y", formulas=[[], []],
                           tau=0.9)
    m = fit(spec, {"y": y})
    p = tmp_path / "ald.json"
    save_model(m, p)
    loaded = load_model(p)
    assert loaded.spec.tau == 0.9
    assert loaded.family.tau == 0.9
    np.testing.assert_array_equal(loaded.beta, m.beta)


def test_censored_spec_round_trip(tmp_path):
    rng = np.random.default_rng(44)
    y = rng.normal(5.0, 2.0, 300)
    lo = np.floor(y)
    spec = model.ModelSpec("gauss", censor=("lo", "hi"),
                           formulas=[[], []])
    m = fit(spec, {"lo": lo, "hi": lo + 1.0})
    p = tmp_path / "cens.json"
    save_model(m, p)
    loaded = load_model(p)
    assert loaded.spec.censor == ("lo", "hi")
    np.testing.assert_array_equal(loaded.beta, m.beta)


def test_format_guards(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ValueError, match="not a saved model"):
        load_model(p)
    p.write_text(json.dumps({"format": "evsmooth-model", "version": 99}))
    with pytest.raises(ValueError, match="version"):
        load_model(p)
