"""Penalized likelihood fitting with REML smoothness selection.

Fitting is a nested optimization.  The inner problem maximizes the
penalized log likelihood

    l_pen(beta) = l(beta) - 0.5 * beta' S_lam beta

by Newton's method for fixed smoothing parameters lam.  The outer
problem minimizes the negated Laplace-approximate restricted log
likelihood

    laml(rho) = -[ l_pen(beta_hat)
                   + 0.5 log|S_lam|_+ - 0.5 log|H_p| ]

over rho = log lam, where H_p is the penalized Hessian at beta_hat and
|.|_+ the product of positive eigenvalues.  The outer optimizer is a
quasi-Newton (BFGS) iteration with central finite-difference gradients;
every outer evaluation warm-starts the inner Newton solve from the
current best coefficients.
"""

import numpy as np
from scipy import linalg

from .design import build_designs
from .families import build_pp_data

INNER_GRAD_TOL = 1e-7
INNER_MAX_ITER = 200
INNER_MAX_HALVING = 30
RIDGE_SCALE = 1e-7
OUTER_FD_STEP = 1e-4
OUTER_MAX_ITER = 100
OUTER_REL_TOL = 1e-7
OUTER_STEP_TOL = 1e-4
RHO_BOUND = 15.0
EIG_RTOL = 1e-10


class FitError(RuntimeError):
    pass


class InnerNonConvergence(FitError):
    def __init__(self, msg, beta=None):
        super().__init__(msg)
        self.beta = beta


class PenaltyStructure:
    """Global penalty bookkeeping over all parameter designs."""

    def __init__(self, designs):
        self.offsets = []
        off = 0
        for d in designs:
            self.offsets.append(off)
            off += d.ncol
        self.ncoef = off
        self.parts = []      # (global column indices, S, lambda index)
        self.term_groups = []
        for d, o in zip(designs, self.offsets):
            for t in d.terms:
                if not t.penalties:
                    continue
                cols = np.arange(o + t.cols.start, o + t.cols.stop)
                group = []
                for S, li in zip(t.penalties, t.lambda_idx):
                    self.parts.append((cols, S, li))
                    group.append((S, li))
                cache = None
                if len(group) == 1:
                    w = linalg.eigvalsh(group[0][0])
                    pos = w[w > EIG_RTOL * max(w.max(), 1.0)]
                    cache = (len(pos), float(np.sum(np.log(pos))))
                self.term_groups.append((cols, group, cache))
        self.nlam = 1 + max((li for _, _, li in self.parts), default=-1)

    def S_lambda(self, rho):
        S = np.zeros((self.ncoef, self.ncoef))
        lam = np.exp(rho)
        for cols, Sk, li in self.parts:
            S[np.ix_(cols, cols)] += lam[li] * Sk
        return S

    def logdet_plus(self, rho):
        """Sum over penalized terms of log|sum_k lam_k S_k|_+."""
        out = 0.0
        lam = np.exp(rho)
        for cols, group, cache in self.term_groups:
            if cache is not None:
                rank, ld = cache
                out += rank * rho[group[0][1]] + ld
            else:
                St = sum(lam[li] * S for S, li in group)
                w = linalg.eigvalsh(St)
                pos = w[w > EIG_RTOL * max(w.max(), 1.0)]
                out += float(np.sum(np.log(pos)))
        return out


def _chol_with_ridge(A):
    """Cholesky factor of A, adding an escalating ridge if needed.

    Returns (factor, ridge_used).  Raises FitError after 20 attempts.
    """
    try:
        return linalg.cho_factor(A, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    base = RIDGE_SCALE * float(np.mean(np.abs(np.diag(A))))
    if base <= 0.0:
        base = RIDGE_SCALE
    ridge = base
    eye = np.eye(A.shape[0])
    for _ in range(20):
        try:
            return linalg.cho_factor(A + ridge * eye, lower=True), ridge
        except linalg.LinAlgError:
            ridge *= 10.0
    raise FitError("penalized Hessian could not be regularized")


class Objective:
    """Bundles the data, designs and family into callables on beta."""

    def __init__(self, family, designs, ydata, censor=None):
        self.family = family
        self.designs = designs
        self.Xs = None
        self.ydata = ydata
        self.censor = censor
        self.offsets = []
        off = 0
        for d in designs:
            self.offsets.append(off)
            off += d.ncol
        self.ncoef = off

    def bind(self, data):
        self.Xs = [d.design(data) for d in self.designs]

    def etas(self, beta):
        cols = []
        for X, o, d in zip(self.Xs, self.offsets, self.designs):
            cols.append(X @ beta[o:o + d.ncol])
        return np.column_stack(cols)

    def terms(self, beta):
        eta = self.etas(beta)
        # Wild trial steps can overflow intermediate arrays; the
        # resulting non-finite likelihoods are rejected by the callers.
        with np.errstate(over="ignore", invalid="ignore"):
            if self.censor is not None:
                lo, hi = self.censor
                return self.family.interval_terms(lo, hi, eta)
            return self.family.point_terms(self.ydata, eta)

    def loglik(self, beta):
        """Sum log likelihood, or None when beta is out of support."""
        ll, _, _, ok = self.terms(beta)
        if not np.all(ok):
            return None
        tot = float(np.sum(ll))
        return tot if np.isfinite(tot) else None

    def loglik_grad_hess(self, beta):
        ll, l1, l2, ok = self.terms(beta)
        if not np.all(ok) or not np.isfinite(ll.sum()):
            return None
        P = self.ncoef
        g = np.empty(P)
        H = np.zeros((P, P))
        d = self.family.nparam
        for p in range(d):
            Xp = self.Xs[p]
            op, wp = self.offsets[p], self.designs[p].ncol
            g[op:op + wp] = Xp.T @ l1[:, p]
            for q in range(p, d):
                Xq = self.Xs[q]
                oq, wq = self.offsets[q], self.designs[q].ncol
                blk = -(Xp * l2[:, p, q][:, None]).T @ Xq
                H[op:op + wp, oq:oq + wq] += blk
                if q > p:
                    H[oq:oq + wq, op:op + wp] += blk.T
        return float(ll.sum()), g, H


def inner_newton(obj, beta0, S_lam, *, max_iter=INNER_MAX_ITER, trace=0):
    """Maximize the penalized log likelihood for fixed penalties.

    Returns a dict with the solution, the unpenalized Hessian H and the
    penalized-Hessian Cholesky factor.  Raises InnerNonConvergence
    (carrying the best iterate) if the gradient tolerance is not met.
    """
    beta = np.asarray(beta0, dtype=float).copy()
    res = obj.loglik_grad_hess(beta)
    if res is None:
        raise InnerNonConvergence("initial coefficients out of support",
                                  beta=beta)
    ll, g, H = res
    pen = 0.5 * beta @ S_lam @ beta
    best = (ll - pen, beta.copy())
    for it in range(max_iter):
        Sb = S_lam @ beta
        gp = g - Sb
        f0 = ll - 0.5 * beta @ Sb
        if np.max(np.abs(gp)) < INNER_GRAD_TOL * max(1.0, abs(f0)):
            Hp = H + S_lam
            cho, ridge = _chol_with_ridge(Hp)
            return {"beta": beta, "loglik": ll, "penalized": f0,
                    "grad": gp, "H": Hp - S_lam, "cho": cho,
                    "ridge": ridge, "iterations": it, "converged": True}
        Hp = H + S_lam
        cho, _ = _chol_with_ridge(Hp)
        step = linalg.cho_solve(cho, gp)
        Sstep = S_lam @ step
        accepted = False
        for _ in range(INNER_MAX_HALVING):
            cand = beta + step
            llc = obj.loglik(cand)
            if llc is not None:
                # Penalty change computed as a difference: near a
                # stationary point with large lambda the full quadratic
                # form drowns a tiny Newton gain in roundoff.
                df = (llc - ll) - step @ Sb - 0.5 * step @ Sstep
                if np.isfinite(df) and df > -1e-12 * max(1.0, abs(f0)):
                    beta = cand
                    ll, g, H = obj.loglik_grad_hess(cand)
                    accepted = True
                    break
            step *= 0.5
            Sstep *= 0.5
        if trace > 1:
            print(f"    inner it {it}: lpen {f0:.6f}")
        if not accepted:
            break
        if ll - 0.5 * beta @ S_lam @ beta > best[0]:
            best = (ll - 0.5 * beta @ S_lam @ beta, beta.copy())
    raise InnerNonConvergence("inner Newton failed to converge",
                              beta=best[1])


class LamlState:
    """LAML objective with warm-started inner solves."""

    def __init__(self, obj, pstruct, beta_init, trace=0):
        self.obj = obj
        self.pstruct = pstruct
        self.beta_warm = np.asarray(beta_init, dtype=float)
        self.trace = trace
        self.last = None

    def value(self, rho):
        """laml at rho, +inf when the inner solve fails."""
        S_lam = self.pstruct.S_lambda(rho)
        try:
            sol = inner_newton(self.obj, self.beta_warm, S_lam,
                               trace=self.trace)
        except (InnerNonConvergence, FitError):
            return np.inf
        ldS = self.pstruct.logdet_plus(rho)
        ldH = 2.0 * float(np.sum(np.log(np.diag(sol["cho"][0]))))
        val = -(sol["penalized"] + 0.5 * ldS - 0.5 * ldH)
        self.last = (rho.copy(), sol)
        return val

    def accept(self, rho):
        """Record rho's solution as the new warm start."""
        if self.last is None or not np.array_equal(self.last[0], rho):
            if not np.isfinite(self.value(rho)):
                raise FitError("inner solve failed at accepted rho")
        self.beta_warm = self.last[1]["beta"].copy()


def fd_gradient(f, x, step=OUTER_FD_STEP):
    g = np.empty_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def bfgs_box(f, x0, *, lower=-RHO_BOUND, upper=RHO_BOUND,
             max_iter=OUTER_MAX_ITER, trace=0, on_accept=None):
    """BFGS minimization with finite-difference gradients and box
    clamping of the iterates.  Infinite trial values are handled by
    step halving in the line search."""
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fx = f(x)
    if not np.isfinite(fx):
        raise FitError("outer objective not finite at the start")
    if on_accept is not None:
        on_accept(x)
    g = fd_gradient(f, x)
    Hinv = np.eye(len(x))
    converged = False
    last_df = np.inf
    history = [(x.copy(), fx)]
    it = 0
    for it in range(max_iter):
        if not np.all(np.isfinite(g)):
            break
        p = -Hinv @ g
        if np.dot(p, g) >= 0.0:      # reset on loss of descent
            Hinv = np.eye(len(x))
            p = -g
        alpha = 1.0
        fnew = np.inf
        xnew = x
        for _ in range(30):
            cand = np.clip(x + alpha * p, lower, upper)
            fc = f(cand)
            if np.isfinite(fc) and fc <= fx + 1e-4 * np.dot(g, cand - x):
                xnew, fnew = cand, fc
                break
            alpha *= 0.5
        else:
            # No descent found.  If the objective had already stopped
            # moving this is a flat stretch (lambda -> infinity, or the
            # noise floor of the inner solve), not a failure.
            if last_df < OUTER_REL_TOL * (1.0 + abs(fx)):
                converged = True
            break
        dx = xnew - x
        df = fx - fnew
        last_df = df
        if on_accept is not None:
            on_accept(xnew)
        gnew = fd_gradient(f, xnew)
        yv = gnew - g
        sy = float(yv @ dx)
        if sy > 1e-12 * max(1.0, float(np.abs(yv) @ np.abs(dx))):
            rhok = 1.0 / sy
            I = np.eye(len(x))
            A = I - rhok * np.outer(dx, yv)
            Hinv = A @ Hinv @ A.T + rhok * np.outer(dx, dx)
        x, fx, g = xnew, fnew, gnew
        history.append((x.copy(), fx))
        if trace > 0:
            print(f"  outer it {it}: laml {fx:.6f} rho {np.round(x, 4)}")
        if df < OUTER_REL_TOL * (1.0 + abs(fx)) \
                and np.max(np.abs(dx)) < OUTER_STEP_TOL:
            converged = True
            break
    return {"x": x, "f": fx, "iterations": it + 1, "converged": converged,
            "history": history}


def newton_box(f, x0, *, lower=-RHO_BOUND, upper=RHO_BOUND,
               max_iter=OUTER_MAX_ITER, trace=0, on_accept=None):
    """Newton minimization with finite-difference derivatives, used for
    the outer problem when requested."""
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fx = f(x)
    if not np.isfinite(fx):
        raise FitError("outer objective not finite at the start")
    if on_accept is not None:
        on_accept(x)
    converged = False
    last_df = np.inf
    history = [(x.copy(), fx)]
    it = 0
    h = OUTER_FD_STEP
    for it in range(max_iter):
        K = len(x)
        g = fd_gradient(f, x)
        Hm = np.empty((K, K))
        for i in range(K):
            xp = x.copy()
            xp[i] += h
            xm = x.copy()
            xm[i] -= h
            Hm[i] = (fd_gradient(f, xp) - fd_gradient(f, xm)) / (2.0 * h)
        Hm = 0.5 * (Hm + Hm.T)
        w, V = linalg.eigh(Hm)
        w = np.maximum(np.abs(w), 1e-6)     # keep the step a descent step
        p = -V @ ((V.T @ g) / w)
        alpha = 1.0
        xnew, fnew = x, np.inf
        for _ in range(30):
            cand = np.clip(x + alpha * p, lower, upper)
            fc = f(cand)
            if np.isfinite(fc) and fc <= fx + 1e-4 * np.dot(g, cand - x):
                xnew, fnew = cand, fc
                break
            alpha *= 0.5
        else:
            if last_df < OUTER_REL_TOL * (1.0 + abs(fx)):
                converged = True
            break
        dx = xnew - x
        df = fx - fnew
        last_df = df
        if on_accept is not None:
            on_accept(xnew)
        x, fx = xnew, fnew
        history.append((x.copy(), fx))
        if trace > 0:
            print(f"  outer it {it}: laml {fx:.6f} rho {np.round(x, 4)}")
        if df < OUTER_REL_TOL * (1.0 + abs(fx)) \
                and np.max(np.abs(dx)) < OUTER_STEP_TOL:
            converged = True
            break
    return {"x": x, "f": fx, "iterations": it + 1, "converged": converged,
            "history": history}


def _as_columns(data):
    """Normalize data to a dict of 1-d numpy arrays."""
    if hasattr(data, "columns"):
        return {c: np.asarray(data[c]) for c in data.columns}
    return {k: np.asarray(v) for k, v in data.items()}


def _used_columns(spec, family):
    cols = []
    if spec.response is not None:
        cols.append(spec.response)
    if spec.censor is not None:
        cols.extend(spec.censor)
    if spec.pp_args:
        cols.append(spec.pp_args["group"])
    for terms in spec.terms_for(family.nparam):
        for t in terms:
            if hasattr(t, "covariates"):
                cols.extend(t.covariates)
            else:
                cols.append(t.covariate)
    seen = []
    for c in cols:
        if c not in seen:
            seen.append(c)
    return seen


class FittedModel:
    """Everything needed for prediction and inference after a fit."""

    def __init__(self, spec, family, designs, beta, V, H, rho, edf_terms,
                 meta):
        self.spec = spec
        self.family = family
        self.designs = designs
        self.beta = beta
        self.V = V
        self.H = H
        self.rho = rho
        self.edf_terms = edf_terms   # (param, label, edf, ncol, is_smooth)
        self.meta = meta
        self._fitstate = None        # (Objective, PenaltyStructure, beta)

    def reml_objective(self):
        """The LAML objective as a function of rho, warm-started at the
        fitted coefficients.  Only available on freshly fitted models
        (not after loading from disk)."""
        if self._fitstate is None:
            raise RuntimeError(
                "the restricted likelihood is only available on a "
                "freshly fitted model")
        obj, pstruct, beta = self._fitstate
        return LamlState(obj, pstruct, beta).value

    @property
    def edf(self):
        return float(sum(e[2] for e in self.edf_terms))

    def coef_slices(self):
        out = []
        off = 0
        for d in self.designs:
            for t in d.terms:
                out.append((d.name, t,
                            slice(off + t.cols.start, off + t.cols.stop)))
            off += d.ncol
        return out

    def predict(self, newdata, type="response", prob=None, se_fit=False,
                **kw):
        from .inference import predict
        return predict(self, newdata, type=type, prob=prob, se_fit=se_fit,
                       **kw)

    def simulate(self, newdata, nsim=100, seed=0, type="response",
                 prob=None, **kw):
        from .inference import simulate
        return simulate(self, newdata, nsim=nsim, seed=seed, type=type,
                        prob=prob, **kw)

    def summary(self):
        from .inference import summarize
        return summarize(self)

    def save(self, path):
        from .serialize import save_model
        save_model(self, path)


def fit(spec, data, *, trace=0, maxdata=None, maxspline=2000, rho0=0.0,
        inits=None, outer="bfgs", seed=0):
    """Fit the model described by ``spec`` to ``data``.

    Options mirror the fitting controls: trace (0 silent, larger values
    report outer/inner progress), maxdata (subsample cap on rows,
    without replacement), maxspline (cap on points used to build
    bases), rho0 (initial log smoothing parameters, scalar or vector),
    inits (initial linked-parameter intercepts), outer ("bfgs",
    "newton", "fd" or "fixed"), seed (for the maxdata subsample).
    """
    family = spec.make_family()
    cols = _as_columns(data)
    used = _used_columns(spec, family)
    for c in used:
        if c not in cols:
            raise KeyError(f"column {c!r} missing from data")

    # Row filter: keep rows where every used numeric column is finite.
    n = len(next(iter(cols.values())))
    keep = np.ones(n, dtype=bool)
    group_col = spec.pp_args["group"] if spec.pp_args else None
    for c in used:
        if c == group_col:
            continue
        v = np.asarray(cols[c], dtype=float)
        keep &= np.isfinite(v)
    if not np.all(keep):
        cols = {k: v[keep] for k, v in cols.items()}
        n = int(keep.sum())
    if n == 0:
        raise ValueError("no usable rows in data")

    if maxdata is not None and n > maxdata:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(n, size=maxdata, replace=False))
        cols = {k: v[pick] for k, v in cols.items()}
        n = maxdata

    ald_shift = ald_scale = None
    censor = None
    if spec.family == "pp":
        pa = spec.pp_args
        y = np.asarray(cols[spec.response], dtype=float)
        ppdata, codes = build_pp_data(y, cols[pa["group"]],
                                      r=pa.get("r", -1), ny=pa.get("ny", 1.0))
        # one design row per group; covariates must not vary inside one
        gidx = np.unique(np.asarray(cols[pa["group"]]), return_inverse=True)[1]
        first = np.zeros(ppdata.ngroups, dtype=int)
        seen = np.zeros(ppdata.ngroups, dtype=bool)
        for i, gi in enumerate(gidx):
            if not seen[gi]:
                first[gi] = i
                seen[gi] = True
        for c in used:
            if c in (spec.response, pa["group"]):
                continue
            v = np.asarray(cols[c], dtype=float)
            for gi in range(ppdata.ngroups):
                vg = v[gidx == gi]
                if np.ptp(vg) > 0.0:
                    raise ValueError(
                        f"covariate {c!r} varies within pp group")
        fit_cols = {k: np.asarray(v)[first] for k, v in cols.items()}
        ydata = ppdata
    elif spec.censor is not None:
        lo = np.asarray(cols[spec.censor[0]], dtype=float)
        hi = np.asarray(cols[spec.censor[1]], dtype=float)
        if np.any(hi < lo):
            raise ValueError("censoring intervals must have lower <= upper")
        censor = (lo, hi)
        fit_cols = cols
        ydata = 0.5 * (lo + hi)
    else:
        y = np.asarray(cols[spec.response], dtype=float)
        if spec.family == "ald":
            ald_shift = float(np.mean(y))
            sd = float(np.std(y))
            ald_scale = sd if sd > 0.0 else 1.0
            y = (y - ald_shift) / ald_scale
        if spec.family in ("gpd", "exponential") and np.any(y <= 0.0):
            raise ValueError(
                f"{spec.family} responses must be positive excesses")
        fit_cols = cols
        ydata = y

    designs, nlam = build_designs(spec, family, fit_cols,
                                  maxspline=maxspline)
    obj = Objective(family, designs, ydata, censor=censor)
    obj.bind(fit_cols)
    pstruct = PenaltyStructure(designs)

    beta0 = np.zeros(pstruct.ncoef)
    init = family.initial_values(ydata)
    if inits is not None:
        init = np.asarray(inits, dtype=float)
        if len(init) != family.nparam:
            raise ValueError(
                f"inits must give {family.nparam} linked intercepts")
    for j, d in enumerate(designs):
        beta0[pstruct.offsets[j]] = init[j]

    # Widen the scale until the starting point is inside the support.
    scale_idx = None
    for j, nm in enumerate(family.param_names):
        if nm == "logscale":
            scale_idx = pstruct.offsets[j]
    tries = 0
    while obj.loglik(beta0) is None:
        if scale_idx is None or tries >= 50:
            raise FitError("could not find a feasible starting point")
        beta0[scale_idx] += np.log(2.0)
        tries += 1

    rho = np.full(pstruct.nlam, rho0, dtype=float) if np.isscalar(rho0) \
        else np.asarray(rho0, dtype=float).copy()
    if len(rho) != pstruct.nlam:
        raise ValueError(f"rho0 must have length {pstruct.nlam}")

    outer_info = {"iterations": 0, "converged": True, "history": []}
    state = LamlState(obj, pstruct, beta0, trace=trace)
    if pstruct.nlam == 0 or outer == "fixed":
        sol = inner_newton(obj, beta0, pstruct.S_lambda(rho), trace=trace)
        laml = -(sol["penalized"] + 0.5 * pstruct.logdet_plus(rho)
                 - 0.5 * 2.0 * float(np.sum(np.log(np.diag(sol["cho"][0])))))
    else:
        optimizer = {"bfgs": bfgs_box, "fd": bfgs_box,
                     "newton": newton_box}.get(outer)
        if optimizer is None:
            raise ValueError(f"unknown outer optimizer {outer!r}")
        result = optimizer(state.value, rho, trace=trace,
                           on_accept=state.accept)
        rho = result["x"]
        laml = result["f"]
        outer_info = {k: result[k] for k in
                      ("iterations", "converged", "history")}
        if not result["converged"] and trace >= 0:
            import warnings
            warnings.warn("outer optimization did not converge",
                          RuntimeWarning)
        state.accept(rho)
        sol = state.last[1]

    H = sol["H"]
    S_lam = pstruct.S_lambda(rho)
    Hp = H + S_lam
    cho, ridge = _chol_with_ridge(Hp)
    V = linalg.cho_solve(cho, np.eye(pstruct.ncoef))
    V = 0.5 * (V + V.T)
    beta = sol["beta"]
    loglik = sol["loglik"]

    edf_all = np.diag(V @ H)
    edf_terms = []
    off = 0
    for d in designs:
        for t in d.terms:
            sl = slice(off + t.cols.start, off + t.cols.stop)
            edf_terms.append((d.name, t.label, float(np.sum(edf_all[sl])),
                              t.ncol, t.is_smooth))
        off += d.ncol

    meta = {
        "n": n, "loglik": float(loglik), "laml": float(laml),
        "outer": outer_info, "inner_iterations": sol["iterations"],
        "ridge": ridge, "nlam": pstruct.nlam,
        "options": {"maxdata": maxdata, "maxspline": maxspline,
                    "outer": outer, "seed": seed},
    }
    if spec.family == "pp":
        meta["pp_groups"] = int(ydata.ngroups)

    if ald_shift is not None:
        # Undo the response standardization: location coefficients are
        # rescaled and shifted, the log-scale intercept picks up log s.
        D = np.ones(pstruct.ncoef)
        D[pstruct.offsets[0]:pstruct.offsets[0] + designs[0].ncol] = ald_scale
        beta = beta * D
        beta[pstruct.offsets[0]] += ald_shift
        beta[pstruct.offsets[1]] += np.log(ald_scale)
        V = V * np.outer(D, D)
        H = H / np.outer(D, D)
        meta["loglik"] = float(loglik - n * np.log(ald_scale))
        meta["ald_standardization"] = {"shift": ald_shift,
                                       "scale": ald_scale}

    model = FittedModel(spec, family, designs, beta, V, H, rho, edf_terms,
                        meta)
    model._fitstate = (obj, pstruct, sol["beta"].copy())
    return model
