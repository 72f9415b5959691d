"""Prediction, uncertainty and reporting for fitted models.

Standard errors come from the Bayesian large-sample view of the
penalized fit: coefficients are treated as approximately normal with
covariance V, the inverse penalized Hessian.  Derived quantities get
delta-method errors through their gradient with respect to the linked
parameters; simulate() instead draws coefficient vectors from N(beta,
V) and pushes each draw through the requested transformation.
"""

import numpy as np
import pandas as pd
from scipy import linalg, special, stats

from .families import XI_TOL


def _design_blocks(model, newdata):
    data = newdata
    if hasattr(data, "columns"):
        data = {c: np.asarray(data[c]) for c in data.columns}
    return [d.design(data) for d in model.designs]


def _coef_blocks(model):
    out = []
    off = 0
    for d in model.designs:
        out.append(slice(off, off + d.ncol))
        off += d.ncol
    return out


def linked_parameters(model, newdata):
    """Linked-scale parameter values at newdata, one column each."""
    Xs = _design_blocks(model, newdata)
    sl = _coef_blocks(model)
    return np.column_stack([X @ model.beta[s] for X, s in zip(Xs, sl)])


def _link_se(model, Xs):
    sl = _coef_blocks(model)
    ses = []
    for X, s in zip(Xs, sl):
        Vp = model.V[s, s]
        ses.append(np.sqrt(np.einsum("ij,jk,ik->i", X, Vp, X)))
    return np.column_stack(ses)


def _quantile_gradient(model, eta, prob, m=1.0, zeta=1.0, theta=1.0):
    """Per-row quantile and its gradient in the linked parameters."""
    name = model.family.name
    n = eta.shape[0]
    if name in ("gev", "pp"):
        mu, psi, xi = eta[:, 0], np.exp(eta[:, 1]), eta[:, 2]
        lx = np.log(-np.log(prob))
        ser = np.abs(xi) < XI_TOL
        xs = np.where(ser, 1.0, xi)
        xp = np.exp(-xs * lx)          # (-log p)^(-xi)
        z = np.where(ser, mu - psi * lx,
                     mu - psi / xs * (1.0 - xp))
        dz_db = np.where(ser, -psi * lx, -(psi / xs) * (1.0 - xp))
        dz_dxi = np.where(ser, psi * lx ** 2 / 2.0,
                          psi / xs ** 2 * (1.0 - xp)
                          - psi / xs * xp * lx)
        grad = np.column_stack([np.ones(n), dz_db, dz_dxi])
        return z, grad
    if name == "gpd":
        psi, xi = np.exp(eta[:, 0]), eta[:, 1]
        arg = m * zeta * theta / (1.0 - prob)
        if np.any(np.asarray(arg) < 1.0):
            raise ValueError(
                "return level below the threshold: m*zeta*theta/(1-p) < 1")
        L = np.log(arg)
        ser = np.abs(xi) < XI_TOL
        xs = np.where(ser, 1.0, xi)
        xp = np.exp(xs * L)            # arg^xi
        z = np.where(ser, psi * L, psi / xs * (xp - 1.0))
        dz_dxi = np.where(ser, psi * L ** 2 / 2.0,
                          -psi / xs ** 2 * (xp - 1.0) + psi / xs * xp * L)
        grad = np.column_stack([z, dz_dxi])
        return z, grad
    if name == "gauss":
        mval, sd = eta[:, 0], np.exp(eta[:, 1])
        q = special.ndtri(prob)
        z = mval + sd * q
        return z, np.column_stack([np.ones(n), sd * q])
    if name == "exponential":
        sc = np.exp(eta[:, 0])
        z = -sc * np.log1p(-prob)
        return z, z[:, None].copy()
    if name == "ald":
        # the fitted location is the tau quantile itself
        return eta[:, 0].copy(), np.column_stack([np.ones(n), np.zeros(n)])
    raise ValueError(f"quantiles not available for family {name!r}")


def predict(model, newdata, type="response", prob=None, se_fit=False,
            m=1.0, zeta=1.0, theta=1.0):
    """Predictions at newdata.

    type "link" gives the linked parameters, "response" the family
    parameters on their natural scale, and "quantile" the per-row
    quantile at probability ``prob`` (with m, zeta and theta entering
    the generalized Pareto return level).  With se_fit, columns
    "<name>_se" from the delta method are appended.
    """
    Xs = _design_blocks(model, newdata)
    sl = _coef_blocks(model)
    eta = np.column_stack([X @ model.beta[s] for X, s in zip(Xs, sl)])
    names = list(model.family.param_names)

    if type == "link":
        out = pd.DataFrame(eta, columns=names)
        if se_fit:
            se = _link_se(model, Xs)
            for j, nm in enumerate(names):
                out[nm + "_se"] = se[:, j]
        return out

    if type == "response":
        theta_cols = model.family.theta(eta)
        cols = {nm.replace("log", ""): c
                for nm, c in zip(names, theta_cols)}
        out = pd.DataFrame(cols)
        if se_fit:
            se = _link_se(model, Xs)
            for j, nm in enumerate(names):
                col = nm.replace("log", "")
                # log links scale the error by the fitted value
                fac = theta_cols[j] if nm.startswith("log") else 1.0
                out[col + "_se"] = se[:, j] * fac
        return out

    if type == "quantile":
        if prob is None:
            raise ValueError("type='quantile' needs prob")
        z, grad = _quantile_gradient(model, eta, float(prob),
                                     m=m, zeta=zeta, theta=theta)
        out = pd.DataFrame({"quantile": z})
        if se_fit:
            G = np.concatenate(
                [grad[:, [j]] * X for j, X in enumerate(Xs)], axis=1)
            out["quantile_se"] = np.sqrt(
                np.einsum("ip,pq,iq->i", G, model.V, G))
        return out

    raise ValueError(f"unknown prediction type {type!r}")


def _coef_draws(model, nsim, rng):
    V = model.V
    try:
        L = linalg.cholesky(V, lower=True)
    except linalg.LinAlgError:
        w, Q = linalg.eigh(V)
        w = np.maximum(w, 1e-10 * w.max())
        L = Q * np.sqrt(w)
    z = rng.standard_normal((nsim, V.shape[0]))
    return model.beta[None, :] + z @ L.T


def simulate(model, newdata, nsim=100, seed=0, type="response", prob=None,
             m=1.0, zeta=1.0, theta=1.0):
    """Posterior simulation: draw coefficients from N(beta, V) and
    evaluate predictions for each draw.

    Returns a dict of (nrow, nsim) arrays keyed by parameter name, or a
    single array for type "quantile".
    """
    rng = np.random.default_rng(seed)
    draws = _coef_draws(model, nsim, rng)
    Xs = _design_blocks(model, newdata)
    sl = _coef_blocks(model)
    names = list(model.family.param_names)
    n = Xs[0].shape[0]

    if type == "quantile":
        if prob is None:
            raise ValueError("type='quantile' needs prob")
        out = np.empty((n, nsim))
        for s in range(nsim):
            eta = np.column_stack(
                [X @ draws[s, b] for X, b in zip(Xs, sl)])
            out[:, s], _ = _quantile_gradient(model, eta, float(prob),
                                              m=m, zeta=zeta, theta=theta)
        return out

    if type not in ("link", "response"):
        raise ValueError(f"unknown simulation type {type!r}")
    etas = np.empty((n, len(names), nsim))
    for s in range(nsim):
        for j, (X, b) in enumerate(zip(Xs, sl)):
            etas[:, j, s] = X @ draws[s, b]
    out = {}
    for j, nm in enumerate(names):
        vals = etas[:, j, :]
        if type == "response" and nm.startswith("log"):
            out[nm.replace("log", "")] = np.exp(vals)
        else:
            out[nm if type == "link" else nm.replace("log", "")] = vals
    return out


class SummaryReport:
    """Coefficient and smooth-term tables with approximate Wald tests."""

    def __init__(self, family, n, loglik, edf, parametric, smooths):
        self.family = family
        self.n = n
        self.loglik = loglik
        self.edf = edf
        self.parametric = parametric
        self.smooths = smooths

    def __str__(self):
        lines = [f"Family: {self.family}",
                 f"n = {self.n}   log-likelihood = {self.loglik:.4f}   "
                 f"total edf = {self.edf:.2f}", ""]
        if len(self.parametric):
            lines.append("Parametric coefficients:")
            lines.append(self.parametric.to_string(
                float_format=lambda v: f"{v:.4f}"))
            lines.append("")
        if len(self.smooths):
            lines.append("Smooth terms (approximate Wald tests):")
            lines.append(self.smooths.to_string(
                float_format=lambda v: f"{v:.4f}"))
            lines.append("")
        return "\n".join(lines)


def summarize(model):
    se_all = np.sqrt(np.clip(np.diag(model.V), 0.0, None))
    prows, srows = [], []
    edf_map = {(p, l): e for p, l, e, _, _ in model.edf_terms}
    for pname, term, sl in model.coef_slices():
        if term.is_smooth:
            b = model.beta[sl]
            Vt = model.V[sl, sl]
            e = edf_map[(pname, term.label)]
            r = max(1, int(np.ceil(e - 1e-8)))
            w, Q = linalg.eigh(Vt)
            keep = np.argsort(w)[::-1][:r]
            winv = 1.0 / np.maximum(w[keep], 1e-12 * w.max())
            bt = Q[:, keep].T @ b
            chisq = float(bt @ (winv * bt))
            p = float(stats.chi2.sf(chisq, df=r))
            srows.append({"param": pname, "term": term.label, "edf": e,
                          "max_df": term.ncol, "chi_sq": chisq,
                          "p_value": p})
        else:
            est = float(model.beta[sl][0])
            se = float(se_all[sl][0])
            zv = est / se if se > 0 else np.nan
            prows.append({"param": pname, "term": term.label,
                          "estimate": est, "se": se, "z": zv,
                          "p_value": 2.0 * float(stats.norm.sf(abs(zv)))})
    return SummaryReport(model.spec.family, model.meta["n"],
                         model.meta["loglik"], model.edf,
                         pd.DataFrame(prows), pd.DataFrame(srows))
