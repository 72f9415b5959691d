"""Return levels: closed forms and the composite annual-maximum solver.

The probability argument ``p`` throughout is the annual non-exceedance
probability, so the 100-year level corresponds to p = 0.99.  For
threshold models the parameter rows describe excesses of a threshold
``loc`` with exceedance rate zeta = 1 - tau, and the extremal index
theta discounts for clustering.
"""

import numpy as np
from scipy import optimize

from .families import (XI_TOL, gev_logcdf, gev_quantile, gpd_cdf,
                       gpd_quantile)

# Root acceptance: |F_ann(z) - p| below this once the bracket has
# collapsed to width 1e-8 * (1 + |z|).
_RESIDUAL_TOL = 1e-9
_MAX_EXPAND = 200


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    return p


def gev_return_level(p, loc, scale, shape):
    """Level exceeded by a GEV annual maximum with probability 1 - p."""
    return gev_quantile(_check_p(p), loc, scale, shape)


def gpd_return_level(p, scale, shape, m=1.0, zeta=1.0, theta=1.0, loc=0.0):
    """Closed-form threshold-model return level.

    loc + (scale/shape)*[(m*zeta*theta/(1-p))^shape - 1], where m is
    the number of observations per period, zeta the threshold
    exceedance probability and theta the extremal index.  Requires the
    level to sit above the threshold: m*zeta*theta >= 1 - p.
    """
    p = _check_p(p)
    scale, shape, loc = (np.asarray(a, dtype=float)
                         for a in (scale, shape, loc))
    arg = m * zeta * theta / (1.0 - p)
    p, scale, shape, loc, arg = np.broadcast_arrays(p, scale, shape, loc,
                                                    np.asarray(arg, float))
    if np.any(arg < 1.0):
        raise ValueError(
            "return level below threshold: m * zeta * theta < 1 - p")
    L = np.log(arg)
    ser = np.abs(shape) < XI_TOL
    xs = np.where(ser, 1.0, shape)
    exact = loc + scale / xs * np.expm1(xs * L)
    return np.where(ser, loc + scale * L, exact)


def _as_rows(loc, scale, shape, alpha):
    """Canonicalize parameters to (nrow, nset) with alpha (nrow,).

    2-d inputs carry one column per parameter draw (for confidence
    intervals via posterior simulation); columns are solved separately.
    """
    arrs = [np.asarray(a, dtype=float) for a in (loc, scale, shape)]
    if any(a.ndim > 2 for a in arrs):
        raise ValueError("parameters must be scalar, 1-d or 2-d")
    nset = max((a.shape[1] for a in arrs if a.ndim == 2), default=1)
    nrow = max((a.shape[0] for a in arrs if a.ndim >= 1), default=1)
    cols = []
    for a in arrs:
        if a.ndim == 2:
            b = np.broadcast_to(a, (nrow, nset))
        else:
            b = np.broadcast_to(a.reshape(-1, 1), (nrow, nset))
        cols.append(b)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (nrow,))
    return cols[0], cols[1], cols[2], alpha, nrow, nset


def annual_cdf(z, loc, scale, shape, m=1.0, alpha=1.0, theta=1.0,
               family="gev", tau=0.0):
    """Composite annual-maximum CDF prod_j F_j(z)^(m * alpha_j [* theta]).

    Each parameter row j contributes one factor.  For "gev" the rows
    are block-maximum distributions and theta is not used.  For "gpd"
    the rows are threshold models: F_j is the unconditional CDF
    1 - zeta*(1 - F_excess(z - loc_j)) with zeta = 1 - tau, continued
    as the constant 1 - zeta below the threshold, and the extremal
    index theta joins the exponent.
    """
    loc, scale, shape, alpha, nrow, nset = _as_rows(loc, scale, shape, alpha)
    if np.ndim(z) != 0:
        raise ValueError("z must be scalar; map over values as needed")
    out = np.empty(nset)
    for s in range(nset):
        out[s] = np.exp(_log_fann(float(z), loc[:, s], scale[:, s],
                                  shape[:, s], m, alpha, theta, family,
                                  tau))
    return out[0] if nset == 1 else out


def _log_fann(z, loc, scale, shape, m, alpha, theta, family, tau):
    if family == "gev":
        lf = gev_logcdf(z, loc, scale, shape)
        expo = m * alpha
    elif family == "gpd":
        zeta = 1.0 - tau
        surv = 1.0 - gpd_cdf(z - loc, scale, shape)
        lf = np.log1p(-zeta * surv)
        expo = m * alpha * theta
    else:
        raise ValueError(f"unknown family for annual CDF: {family!r}")
    val = float(np.sum(expo * lf))
    # Below the support the log CDF is -inf; clamp so the root finder
    # sees finite values (the root itself has every factor near 1).
    return max(val, -1e10)


def _row_quantiles(q, loc, scale, shape, family, tau):
    """Per-row quantile at probability q (thresholded rows clip at loc)."""
    if family == "gev":
        return gev_quantile(q, loc, scale, shape)
    zeta = 1.0 - tau
    # invert 1 - zeta*(1 - F_excess) = q
    qq = 1.0 - (1.0 - q) / zeta
    below = qq <= 0.0
    vals = loc + gpd_quantile(np.where(below, 0.5, qq), scale, shape)
    return np.where(below, loc, vals)


def qev(p, loc, scale, shape, m=1.0, alpha=1.0, theta=1.0, family="gev",
        tau=0.0):
    """Quantile of the composite annual-maximum distribution.

    Solves annual_cdf(z) = p for z.  Parameters follow annual_cdf; the
    exponents are m * alpha_j (times theta for "gpd"), so callers
    discretizing a continuous covariate onto k rows typically pass
    alpha = 1/k.  2-d parameter inputs are solved column by column,
    giving one quantile per parameter draw.
    """
    if family not in ("gev", "gpd"):
        raise ValueError(f"unknown family for qev: {family!r}")
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must lie in (0, 1]")
    if not (0.0 <= tau < 1.0):
        raise ValueError("tau must lie in [0, 1)")
    pval = float(_check_p(p))
    loc, scale, shape, alpha, nrow, nset = _as_rows(loc, scale, shape, alpha)
    out = np.empty(nset)
    for s in range(nset):
        out[s] = _qev_single(pval, loc[:, s], scale[:, s], shape[:, s],
                             m, alpha, theta, family, tau)
    return float(out[0]) if nset == 1 else out


def _qev_single(p, loc, scale, shape, m, alpha, theta, family, tau):
    expo_total = float(np.sum(m * alpha)) * (theta if family == "gpd"
                                             else 1.0)
    if expo_total <= 0.0:
        raise ValueError("total exponent m * sum(alpha) must be positive")
    q_single = p ** (1.0 / expo_total)

    identical = (np.all(loc == loc[0]) and np.all(scale == scale[0])
                 and np.all(shape == shape[0]))
    if identical:
        # one distinct distribution: F(z)^expo_total = p solves exactly
        if family == "gev":
            return float(gev_quantile(q_single, loc[0], scale[0], shape[0]))
        zeta = 1.0 - tau
        qq = 1.0 - (1.0 - q_single) / zeta
        if qq <= 0.0:
            raise ValueError(
                "return level below threshold: requested probability is "
                "reached within the body of the distribution")
        return float(loc[0] + gpd_quantile(qq, scale[0], shape[0]))

    starts = _row_quantiles(q_single, loc, scale, shape, family, tau)
    lo, hi = float(np.min(starts)), float(np.max(starts))

    def h(z):
        return _log_fann(z, loc, scale, shape, m, alpha, theta, family,
                         tau) - np.log(p)

    # F is nondecreasing, so grow the bracket geometrically until it
    # straddles the root.
    width = max(1.0, hi - lo)
    k = 0
    while h(hi) < 0.0:
        hi += width
        width *= 2.0
        k += 1
        if k > _MAX_EXPAND:
            raise RuntimeError("failed to bracket the return level (upper)")
    width = max(1.0, hi - lo)
    k = 0
    while h(lo) > 0.0:
        if family == "gpd" and lo <= float(np.min(loc)):
            raise ValueError(
                "return level below threshold: annual CDF exceeds p at "
                "the lowest threshold")
        lo -= width
        if family == "gpd":
            lo = max(lo, float(np.min(loc)))
        width *= 2.0
        k += 1
        if k > _MAX_EXPAND:
            raise RuntimeError("failed to bracket the return level (lower)")

    if h(lo) == 0.0:
        return lo
    if h(hi) == 0.0:
        return hi
    z = optimize.brentq(h, lo, hi, xtol=1e-12, rtol=8.9e-16)
    fz = np.exp(_log_fann(z, loc, scale, shape, m, alpha, theta, family,
                          tau))
    if abs(fz - p) > _RESIDUAL_TOL:
        raise RuntimeError(
            f"return level residual {abs(fz - p):.2e} above tolerance")
    return float(z)
